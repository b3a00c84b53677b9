#pragma once

#include "sila/metrics.hpp"
#include "sila/model.hpp"
#include "sila/synth.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sila {

enum class MethodKind { batch, standard, sila };

struct MethodSpec {
  MethodKind kind = MethodKind::sila;
  double t_s = 1.0;  // sila only

  /// "batch", "standard" or "sila:<t_s>".
  std::string label() const;
  void validate() const;
  bool operator==(const MethodSpec&) const = default;
};

/// Parses a comma-separated list such as "batch,standard,sila:0.7".
std::vector<MethodSpec> parse_methods(const std::string& list);

struct EpisodeRecord {
  std::string method;
  int trial = 0;
  int episode = 0;
  double weighted_mhd = 0.0;
  int primitives = 0;
  int transitions = 0;
  /// Training trajectories seen up to and including this episode.
  int cumulative_trajectories = 0;
  /// Wall seconds spent learning (zero with timing off).
  double learn_time_s = 0.0;

  int total_size() const { return primitives + transitions; }
  bool operator==(const EpisodeRecord&) const = default;
};

struct SuiteConfig {
  std::size_t batch_size = 20;
  int trials = 5;
  std::uint64_t base_seed = 0;
  /// Stop each trial after this many episodes; 0 runs every batch.
  int max_episodes = 0;
  double test_fraction = 0.15;
  LearnConfig learn;
  EvalConfig eval;
  /// When false, learn times are recorded as 0 so records are reproducible
  /// bit for bit.
  bool timing = true;
  /// Each learning step is timed this many times and the fastest run is
  /// recorded, which filters out scheduling noise. Models come from the
  /// first run.
  int timing_repeats = 1;
};

/// Learning configuration tuned for running many episodes: fewer GP and
/// sparse-coding iterations than the library defaults.
LearnConfig experiment_learn_config();

/// Episode protocol on one dataset: per trial, a fixed held-out test set
/// and a shuffled batch order. Each episode trains one model on the new
/// batch, shared by the standard and sila methods (its training time is
/// charged to each); batch retrains on everything seen so far. All
/// methods are evaluated on the test set after every episode.
std::vector<EpisodeRecord> run_episode_suite(std::span<const NormalizedTrajectory> data, const GridSpec& grid,
                                             std::span<const MethodSpec> methods, const SuiteConfig& cfg);

struct MultiIntersectionConfig {
  int train_per_intersection = 79;
  int test_per_intersection = 13;
  ScenarioConfig scenario;
  SuiteConfig suite;
};

/// Episodes visit the intersections one at a time in an order shuffled
/// per trial; each episode trains on that intersection's data (in the
/// common frame) and evaluates on every test set seen so far. The grid is
/// fitted to all generated data.
std::vector<EpisodeRecord> multi_intersection_suite(const std::vector<IntersectionSetup>& setups,
                                                    std::span<const MethodSpec> methods,
                                                    const MultiIntersectionConfig& cfg);

struct SummaryRow {
  std::string method;
  int episode = 0;
  int trials = 0;
  double mhd_mean = 0.0, mhd_std = 0.0;
  double primitives_mean = 0.0, primitives_std = 0.0;
  double transitions_mean = 0.0, transitions_std = 0.0;
  double total_mean = 0.0, total_std = 0.0;
  double time_mean = 0.0, time_std = 0.0;
};

struct Summary {
  /// Sorted by (method, episode); standard deviations are population ones.
  std::vector<SummaryRow> rows;
  /// Least-squares slope of total model size against cumulative training
  /// trajectories, per method, over all trials.
  std::map<std::string, double> growth_rate;
};

Summary summarize(std::span<const EpisodeRecord> records);

/// Least-squares slope of y against x. Throws DataError when x is constant.
double ls_slope(std::span<const double> x, std::span<const double> y);

}  // namespace sila
