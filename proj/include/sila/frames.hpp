#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace sila {

using Vec2 = Eigen::Vector2d;

struct TimedPoint {
  double t = 0.0;
  Vec2 p = Vec2::Zero();
};

/// Intersection-corner coordinate system. Points are expressed by their
/// contravariant components along the two curbside directions, in units of
/// the sidewalk width.
struct IntersectionFrame {
  std::string name;
  Vec2 origin = Vec2::Zero();
  Vec2 axis1 = Vec2::UnitX();
  Vec2 axis2 = Vec2::UnitY();
  double sidewalk_width = 1.0;

  /// Builds a frame, normalizing both axes to unit length.
  static IntersectionFrame make(std::string name, const Vec2& origin, const Vec2& axis1,
                                const Vec2& axis2, double sidewalk_width);

  /// Throws DataError unless the axes are unit length (1e-9), the basis is
  /// non-degenerate (|det| > 1e-6) and the width is positive.
  void validate() const;

  Vec2 to_common(const Vec2& raw) const;
  Vec2 from_common(const Vec2& normalized) const;
};

/// Trajectory in an intersection's raw metric frame.
struct RawTrajectory {
  std::string id;
  std::string frame_id;
  std::vector<TimedPoint> samples;
};

/// Trajectory in the shared, width-normalized common frame. p holds (a, b).
struct NormalizedTrajectory {
  std::string id;
  std::vector<TimedPoint> samples;
};

/// Raw trajectories with the frames they were recorded in.
struct Dataset {
  std::vector<IntersectionFrame> frames;
  std::vector<RawTrajectory> trajectories;

  /// nullptr when no frame has this name.
  const IntersectionFrame* frame(const std::string& name) const;
  /// Every trajectory mapped to the common frame. Throws DataError for
  /// trajectories whose frame is missing.
  std::vector<NormalizedTrajectory> normalized() const;
};

/// Position plus finite-difference velocity at one sample.
struct KinematicSample {
  double t = 0.0;
  Vec2 p = Vec2::Zero();
  Vec2 v = Vec2::Zero();
};

/// At least two samples with strictly increasing timestamps, all finite.
void validate_samples(const std::vector<TimedPoint>& samples, const std::string& id);

NormalizedTrajectory to_common_frame(const RawTrajectory& traj, const IntersectionFrame& frame);
RawTrajectory from_common_frame(const NormalizedTrajectory& traj, const IntersectionFrame& frame);

/// Linear interpolation at t0, t0 + dt, ...; the final sample is always kept.
NormalizedTrajectory resample(const NormalizedTrajectory& traj, double dt);

/// Forward differences, with the last sample reusing the final backward difference.
std::vector<KinematicSample> finite_differences(const std::vector<TimedPoint>& samples);

}  // namespace sila
