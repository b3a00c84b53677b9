#pragma once

#include "sila/model.hpp"
#include "sila/predictor.hpp"

#include <chrono>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sila {

/// Modified Hausdorff distance: the larger of the two mean nearest-point
/// distances.
double mhd(std::span<const Vec2> a, std::span<const Vec2> b);

/// Sum over hypotheses of weight * mhd(path, truth).
double weighted_mhd(const PredictionSet& preds, std::span<const Vec2> truth);

struct ModelSize {
  int primitives = 0;
  int transitions = 0;
  int total() const { return primitives + transitions; }
};

ModelSize model_size(const Model& model);

/// Runs fn and returns its result with the elapsed monotonic wall time (s).
template <typename F>
auto timed(F&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  if constexpr (std::is_void_v<decltype(fn())>) {
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  } else {
    auto result = fn();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::pair{std::move(result), s};
  }
}

struct EvalConfig {
  PredictConfig predict;
  /// Observed prefix length (s); the following horizon is the ground truth.
  double obs_window = 3.2;
};

struct TrajectoryScore {
  std::string id;
  double weighted_mhd = 0.0;
  /// True when no hypothesis was available and the stationary guess was used.
  bool fallback = false;
};

struct EvalReport {
  double weighted_mhd_mean = 0.0;
  std::vector<TrajectoryScore> per_trajectory;
  int model_primitives = 0;
  int model_transitions = 0;
  double learn_time_s = 0.0;
};

/// Splits each test trajectory (resampled at predict.dt) into the first
/// round(obs_window/dt) samples and up to floor(horizon/dt) following
/// ones (the rollout length), predicts, and scores the hypotheses over the truth's length.
/// Trajectories too short for one truth sample are skipped. When the model
/// cannot predict, the last observed position held still is scored.
EvalReport evaluate(const Model& model, std::span<const NormalizedTrajectory> test, const EvalConfig& cfg);

}  // namespace sila
