#include "sila/metrics.hpp"

#include "sila/error.hpp"
#include "sila/log.hpp"
#include "sila/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace sila {

namespace {

double directed_mean(std::span<const Vec2> from, std::span<const Vec2> to) {
  double sum = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, (p - q).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

double mhd(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.empty() || b.empty()) throw DataError("mhd of an empty point set");
  return std::max(directed_mean(a, b), directed_mean(b, a));
}

double weighted_mhd(const PredictionSet& preds, std::span<const Vec2> truth) {
  if (preds.empty()) throw DataError("weighted_mhd of an empty prediction set");
  double total = 0.0;
  for (const auto& h : preds.hypotheses) total += h.weight * mhd(h.path, truth);
  return total;
}

ModelSize model_size(const Model& model) {
  return {model.dict.size(), static_cast<int>(model.transitions.size())};
}

EvalReport evaluate(const Model& model, std::span<const NormalizedTrajectory> test, const EvalConfig& cfg) {
  const double dt = cfg.predict.dt;
  const auto n_obs = static_cast<std::size_t>(std::lround(cfg.obs_window / dt));
  const auto n_truth = static_cast<std::size_t>(std::floor(cfg.predict.horizon / dt + 1e-9));
  if (n_obs < 2 || n_truth < 1) throw DataError("observation window or horizon too short for dt");

  std::vector<std::optional<TrajectoryScore>> scores(test.size());
  parallel_for(test.size(), [&](std::size_t i) {
    const NormalizedTrajectory r = resample(test[i], dt);
    if (r.samples.size() < n_obs + 1) return;
    NormalizedTrajectory obs{r.id, {r.samples.begin(), r.samples.begin() + static_cast<std::ptrdiff_t>(n_obs)}};
    std::vector<Vec2> truth;
    for (std::size_t k = n_obs; k < std::min(r.samples.size(), n_obs + n_truth); ++k) truth.push_back(r.samples[k].p);

    PredictionSet preds;
    try {
      if (!model.empty()) preds = predict(obs, model, cfg.predict);
    } catch (const DataError& e) {
      logger().debug("prediction for '{}' failed: {}", r.id, e.what());
    }
    TrajectoryScore s{r.id, 0.0, preds.empty()};
    if (preds.empty()) {
      const std::vector<Vec2> still(truth.size(), obs.samples.back().p);
      s.weighted_mhd = mhd(still, truth);
    } else {
      for (auto& h : preds.hypotheses) h.path.resize(std::min(h.path.size(), truth.size()));
      s.weighted_mhd = weighted_mhd(preds, truth);
    }
    scores[i] = std::move(s);
  });

  EvalReport report;
  const ModelSize size = model_size(model);
  report.model_primitives = size.primitives;
  report.model_transitions = size.transitions;
  double sum = 0.0;
  for (auto& s : scores) {
    if (!s) continue;
    sum += s->weighted_mhd;
    report.per_trajectory.push_back(std::move(*s));
  }
  if (!report.per_trajectory.empty()) report.weighted_mhd_mean = sum / static_cast<double>(report.per_trajectory.size());
  return report;
}

}  // namespace sila
