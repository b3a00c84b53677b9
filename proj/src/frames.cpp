#include "sila/frames.hpp"

#include "sila/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace sila {

namespace {

constexpr double kUnitTol = 1e-9;
constexpr double kMinDet = 1e-6;

double basis_det(const Vec2& a1, const Vec2& a2) { return a1.x() * a2.y() - a1.y() * a2.x(); }

}  // namespace

IntersectionFrame IntersectionFrame::make(std::string name, const Vec2& origin, const Vec2& axis1,
                                          const Vec2& axis2, double sidewalk_width) {
  if (!(axis1.norm() > 0.0) || !(axis2.norm() > 0.0)) {
    throw DataError("frame '" + name + "': zero-length axis");
  }
  IntersectionFrame f{std::move(name), origin, axis1.normalized(), axis2.normalized(),
                      sidewalk_width};
  f.validate();
  return f;
}

void IntersectionFrame::validate() const {
  if (!origin.allFinite() || !axis1.allFinite() || !axis2.allFinite()) {
    throw DataError("frame '" + name + "': non-finite geometry");
  }
  if (std::abs(axis1.norm() - 1.0) > kUnitTol || std::abs(axis2.norm() - 1.0) > kUnitTol) {
    throw DataError("frame '" + name + "': axes must be unit length");
  }
  if (std::abs(basis_det(axis1, axis2)) <= kMinDet) {
    throw DataError("frame '" + name + "': degenerate basis (axes nearly parallel)");
  }
  if (!(sidewalk_width > 0.0) || !std::isfinite(sidewalk_width)) {
    throw DataError("frame '" + name + "': sidewalk_width must be positive");
  }
}

Vec2 IntersectionFrame::to_common(const Vec2& raw) const {
  // Cramer's rule on [axis1 axis2] (a, b)^T = raw - origin.
  const Vec2 d = raw - origin;
  const double det = basis_det(axis1, axis2);
  const double a = (d.x() * axis2.y() - d.y() * axis2.x()) / det;
  const double b = (axis1.x() * d.y() - axis1.y() * d.x()) / det;
  return Vec2(a, b) / sidewalk_width;
}

Vec2 IntersectionFrame::from_common(const Vec2& normalized) const {
  const Vec2 c = normalized * sidewalk_width;
  return origin + c.x() * axis1 + c.y() * axis2;
}

void validate_samples(const std::vector<TimedPoint>& samples, const std::string& id) {
  if (samples.empty()) throw DataError("trajectory '" + id + "' is empty");
  if (samples.size() < 2) throw DataError("trajectory '" + id + "' has fewer than 2 samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i].t) || !samples[i].p.allFinite()) {
      throw DataError("trajectory '" + id + "' has a non-finite sample");
    }
    if (i > 0 && !(samples[i].t > samples[i - 1].t)) {
      throw DataError("trajectory '" + id + "' timestamps are not strictly increasing");
    }
  }
}

NormalizedTrajectory to_common_frame(const RawTrajectory& traj, const IntersectionFrame& frame) {
  frame.validate();
  validate_samples(traj.samples, traj.id);
  NormalizedTrajectory out{traj.id, {}};
  out.samples.reserve(traj.samples.size());
  for (const auto& s : traj.samples) out.samples.push_back({s.t, frame.to_common(s.p)});
  return out;
}

RawTrajectory from_common_frame(const NormalizedTrajectory& traj, const IntersectionFrame& frame) {
  frame.validate();
  RawTrajectory out{traj.id, frame.name, {}};
  out.samples.reserve(traj.samples.size());
  for (const auto& s : traj.samples) out.samples.push_back({s.t, frame.from_common(s.p)});
  return out;
}

NormalizedTrajectory resample(const NormalizedTrajectory& traj, double dt) {
  if (!(dt > 0.0)) throw DataError("resample: dt must be positive");
  validate_samples(traj.samples, traj.id);
  const auto& in = traj.samples;
  const double t0 = in.front().t;
  const double t1 = in.back().t;
  const double snap = 1e-9 * dt;
  if (t1 - t0 < dt - snap) {
    throw DataError("resample: trajectory '" + traj.id + "' is shorter than dt");
  }

  NormalizedTrajectory out{traj.id, {}};
  std::size_t seg = 0;
  for (long k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    if (t > t1 + snap) break;
    while (seg + 1 < in.size() && in[seg + 1].t < t - snap) ++seg;
    if (std::abs(in[seg].t - t) <= snap) {
      out.samples.push_back(in[seg]);
    } else if (seg + 1 < in.size() && std::abs(in[seg + 1].t - t) <= snap) {
      out.samples.push_back(in[seg + 1]);
    } else {
      const auto& a = in[seg];
      const auto& b = in[seg + 1];
      const double w = (t - a.t) / (b.t - a.t);
      out.samples.push_back({t, a.p + w * (b.p - a.p)});
    }
  }
  if (out.samples.back().t < t1 - snap) out.samples.push_back(in.back());
  return out;
}

std::vector<KinematicSample> finite_differences(const std::vector<TimedPoint>& samples) {
  std::vector<KinematicSample> out;
  const std::size_t n = samples.size();
  if (n < 2) return out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = (i + 1 < n) ? i : n - 2;
    const Vec2 v = (samples[a + 1].p - samples[a].p) / (samples[a + 1].t - samples[a].t);
    out.push_back({samples[i].t, samples[i].p, v});
  }
  return out;
}

const IntersectionFrame* Dataset::frame(const std::string& name) const {
  for (const auto& f : frames) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::vector<NormalizedTrajectory> Dataset::normalized() const {
  std::vector<NormalizedTrajectory> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) {
    const IntersectionFrame* f = frame(t.frame_id);
    if (f == nullptr) throw DataError(fmt::format("trajectory '{}' refers to unknown frame '{}'", t.id, t.frame_id));
    out.push_back(to_common_frame(t, *f));
  }
  return out;
}

}  // namespace sila
