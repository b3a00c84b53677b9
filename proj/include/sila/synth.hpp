#pragma once

#include "sila/frames.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace sila {

enum class CornerKind { right, open, closed };

CornerKind parse_corner_kind(const std::string& s);
std::string to_string(CornerKind kind);

struct IntersectionTemplate {
  std::string name;
  CornerKind kind = CornerKind::right;
  double corner_angle = 90.0;  // degrees
  double sidewalk_width = 3.0; // meters
  bool crosswalk = true;

  void validate() const;
};

struct IntersectionSetup {
  IntersectionTemplate tpl;
  IntersectionFrame frame;
};

/// right = 90, open = 120, closed = 60 degrees; width uniform in [2, 4] m,
/// origin and heading drawn from the seed.
IntersectionSetup make_template(CornerKind kind, std::uint64_t seed);

enum class Behavior { straight1, straight2, corner_turn, cross };

std::string to_string(Behavior b);

struct ScenarioConfig {
  int n_trajectories = 200;
  double noise_std = 0.1;  // meters, per coordinate
  double speed_min = 1.0;  // m/s
  double speed_max = 1.6;
  /// Weights over straight-1, straight-2, corner-turn, cross.
  std::array<double, 4> behavior_mix{0.3, 0.3, 0.25, 0.15};
  double truncate_prob = 0.2;
  /// Largest fraction of samples removed from one end when truncating.
  double max_truncate = 0.4;
  /// Probability of walking a route in the opposite direction.
  double reverse_prob = 0.5;
  /// Half-width of the uniform sideways offset of a route (sidewalk widths).
  double lateral_spread = 0.15;
  double sample_rate_hz = 2.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Generated trajectory with the route it follows.
struct SyntheticTrajectory {
  RawTrajectory traj;
  Behavior behavior = Behavior::straight1;
  /// Noise-free route in raw meters; every noise-free sample lies on it.
  std::vector<Vec2> nominal;
};

/// Routes are laid out in the common frame: sidewalk 1 along b = 0.5,
/// sidewalk 2 along a = 0.5, the streets beyond each curb (negative a or b)
/// about two widths wide, and everything extending five widths from the
/// corner. Corners are rounded with 1 m arcs. Sample times start at 0.
std::vector<SyntheticTrajectory> generate_trajectories(const IntersectionSetup& setup, const ScenarioConfig& cfg);

/// Convenience: the raw trajectories only.
std::vector<RawTrajectory> raw_trajectories(const std::vector<SyntheticTrajectory>& synth);

struct EpisodeSplit {
  std::vector<std::size_t> test;
  std::vector<std::vector<std::size_t>> batches;
};

/// Holds out round(15%) of [0, n) chosen by split_seed, shuffles the rest
/// by trial_seed and chunks it into batches (the last one may be short).
EpisodeSplit split_episodes(std::size_t n, std::size_t batch_size, std::uint64_t split_seed,
                            std::uint64_t trial_seed, double test_fraction = 0.15);

/// Distance from p to a polyline.
double distance_to_polyline(const Vec2& p, const std::vector<Vec2>& polyline);

/// Stateless 64-bit mixer used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sila
