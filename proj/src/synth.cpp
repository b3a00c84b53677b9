#include "sila/synth.hpp"

#include "sila/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace sila {

namespace {

constexpr double kFilletMeters = 1.0;
constexpr int kArcPieces = 24;

Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

// Replaces each interior corner of a polyline by a circular arc of radius r
// tangent to both legs (shrunk when a leg is too short).
std::vector<Vec2> round_corners(const std::vector<Vec2>& pts, double r) {
  if (pts.size() < 3) return pts;
  std::vector<Vec2> out{pts.front()};
  for (std::size_t k = 1; k + 1 < pts.size(); ++k) {
    const Vec2 u = (pts[k - 1] - pts[k]).normalized();
    const Vec2 w = (pts[k + 1] - pts[k]).normalized();
    const double cos_turn = std::clamp(u.dot(w), -1.0, 1.0);
    const double half = 0.5 * std::acos(cos_turn);  // half the interior angle
    if (half <= 1e-9 || std::abs(half - std::numbers::pi / 2) < 1e-9) {
      out.push_back(pts[k]);
      continue;
    }
    const double max_leg = 0.5 * std::min((pts[k - 1] - pts[k]).norm(), (pts[k + 1] - pts[k]).norm());
    const double radius = std::min(r, max_leg * std::tan(half));
    const double leg = radius / std::tan(half);
    const Vec2 t0 = pts[k] + leg * u;
    const Vec2 t1 = pts[k] + leg * w;
    const Vec2 centre = pts[k] + (u + w).normalized() * (radius / std::sin(half));
    const double a0 = std::atan2(t0.y() - centre.y(), t0.x() - centre.x());
    double a1 = std::atan2(t1.y() - centre.y(), t1.x() - centre.x());
    double sweep = a1 - a0;
    while (sweep > std::numbers::pi) sweep -= 2 * std::numbers::pi;
    while (sweep < -std::numbers::pi) sweep += 2 * std::numbers::pi;
    for (int s = 0; s <= kArcPieces; ++s) {
      const double a = a0 + sweep * s / kArcPieces;
      out.push_back(centre + radius * Vec2(std::cos(a), std::sin(a)));
    }
  }
  out.push_back(pts.back());
  return out;
}

// Route skeleton in the common frame, before offset and rounding.
std::vector<Vec2> route(Behavior b, double offset) {
  const double s = 0.5 + offset;
  switch (b) {
    case Behavior::straight1:
      return {{5.0, s}, {-2.5, s}};
    case Behavior::straight2:
      return {{s, 5.0}, {s, -2.5}};
    case Behavior::corner_turn:
      return {{5.0, s}, {s, s}, {s, 5.0}};
    case Behavior::cross:
      return {{5.0, s}, {1.5 + offset, s}, {1.5 + offset, -2.5}};
  }
  throw InternalError("unknown behavior");
}

// Point at arc length s along a polyline (clamped to its ends).
Vec2 point_at(const std::vector<Vec2>& poly, const std::vector<double>& cum, double s) {
  if (s <= 0.0) return poly.front();
  auto it = std::upper_bound(cum.begin(), cum.end(), s);
  if (it == cum.end()) return poly.back();
  const auto k = static_cast<std::size_t>(it - cum.begin());
  const double seg = cum[k] - cum[k - 1];
  const double f = seg > 0.0 ? (s - cum[k - 1]) / seg : 0.0;
  return poly[k - 1] + f * (poly[k] - poly[k - 1]);
}

}  // namespace

CornerKind parse_corner_kind(const std::string& s) {
  if (s == "right") return CornerKind::right;
  if (s == "open") return CornerKind::open;
  if (s == "closed") return CornerKind::closed;
  throw DataError(fmt::format("unknown intersection template '{}' (expected right, open or closed)", s));
}

std::string to_string(CornerKind kind) {
  switch (kind) {
    case CornerKind::right: return "right";
    case CornerKind::open: return "open";
    case CornerKind::closed: return "closed";
  }
  throw InternalError("unknown corner kind");
}

std::string to_string(Behavior b) {
  switch (b) {
    case Behavior::straight1: return "straight-1";
    case Behavior::straight2: return "straight-2";
    case Behavior::corner_turn: return "corner-turn";
    case Behavior::cross: return "cross";
  }
  throw InternalError("unknown behavior");
}

void IntersectionTemplate::validate() const {
  if (!(corner_angle >= 45.0 && corner_angle <= 135.0)) throw DataError("corner angle must lie in [45, 135] degrees");
  if (!(sidewalk_width > 0.0)) throw DataError("sidewalk width must be positive");
}

IntersectionSetup make_template(CornerKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x7e1));
  std::uniform_real_distribution<double> width(2.0, 4.0);
  std::uniform_real_distribution<double> coord(-50.0, 50.0);
  std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
  IntersectionSetup s;
  s.tpl.kind = kind;
  s.tpl.corner_angle = kind == CornerKind::right ? 90.0 : kind == CornerKind::open ? 120.0 : 60.0;
  s.tpl.sidewalk_width = width(rng);
  s.tpl.name = fmt::format("{}-{}", to_string(kind), seed);
  const Vec2 origin(coord(rng), coord(rng));
  const Vec2 axis1 = rotate(Vec2::UnitX(), heading(rng));
  const Vec2 axis2 = rotate(axis1, s.tpl.corner_angle * std::numbers::pi / 180.0);
  s.frame = IntersectionFrame::make(s.tpl.name, origin, axis1, axis2, s.tpl.sidewalk_width);
  return s;
}

void ScenarioConfig::validate() const {
  if (n_trajectories < 0) throw DataError("trajectory count must be non-negative");
  if (!(noise_std >= 0.0)) throw DataError("noise_std must be non-negative");
  if (!(speed_min > 0.0 && speed_max >= speed_min)) throw DataError("speeds must be positive with min <= max");
  const double total = std::accumulate(behavior_mix.begin(), behavior_mix.end(), 0.0);
  if (std::any_of(behavior_mix.begin(), behavior_mix.end(), [](double w) { return w < 0.0; }) ||
      std::abs(total - 1.0) > 1e-9) {
    throw DataError("behavior weights must be non-negative and sum to 1");
  }
  if (!(truncate_prob >= 0.0 && truncate_prob <= 1.0)) throw DataError("truncate_prob must lie in [0, 1]");
  if (!(max_truncate >= 0.0 && max_truncate < 1.0)) throw DataError("max_truncate must lie in [0, 1)");
  if (!(reverse_prob >= 0.0 && reverse_prob <= 1.0)) throw DataError("reverse_prob must lie in [0, 1]");
  if (!(lateral_spread >= 0.0 && lateral_spread < 0.5)) throw DataError("lateral_spread must lie in [0, 0.5)");
  if (!(sample_rate_hz > 0.0)) throw DataError("sample rate must be positive");
}

std::vector<SyntheticTrajectory> generate_trajectories(const IntersectionSetup& setup, const ScenarioConfig& cfg) {
  cfg.validate();
  setup.tpl.validate();
  setup.frame.validate();
  const double dt = 1.0 / cfg.sample_rate_hz;
  std::vector<SyntheticTrajectory> out;
  out.reserve(static_cast<std::size_t>(cfg.n_trajectories));
  for (int i = 0; i < cfg.n_trajectories; ++i) {
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::discrete_distribution<int> pick(cfg.behavior_mix.begin(), cfg.behavior_mix.end());
    std::normal_distribution<double> noise(0.0, 1.0);

    SyntheticTrajectory st;
    st.behavior = static_cast<Behavior>(pick(rng));
    const double offset = cfg.lateral_spread * (2.0 * unit(rng) - 1.0);
    auto skeleton = route(st.behavior, offset);
    if (unit(rng) < cfg.reverse_prob) std::reverse(skeleton.begin(), skeleton.end());
    const double speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * unit(rng);

    std::vector<Vec2> raw_skeleton;
    for (const auto& q : skeleton) raw_skeleton.push_back(setup.frame.from_common(q));
    st.nominal = round_corners(raw_skeleton, kFilletMeters);
    std::vector<double> cum{0.0};
    for (std::size_t k = 1; k < st.nominal.size(); ++k) cum.push_back(cum.back() + (st.nominal[k] - st.nominal[k - 1]).norm());
    const auto n_samples = static_cast<std::size_t>(std::floor(cum.back() / (speed * dt))) + 1;

    std::size_t first = 0, last = n_samples;
    if (unit(rng) < cfg.truncate_prob) {
      const auto drop = static_cast<std::size_t>(std::floor(cfg.max_truncate * unit(rng) * static_cast<double>(n_samples)));
      if (unit(rng) < 0.5) first = drop;
      else last = n_samples - drop;
    }
    st.traj.id = fmt::format("{}-{:04d}", setup.tpl.name, i);
    st.traj.frame_id = setup.frame.name;
    for (std::size_t k = 0; k < n_samples; ++k) {
      const Vec2 p = point_at(st.nominal, cum, speed * dt * static_cast<double>(k));
      const Vec2 e(noise(rng), noise(rng));
      if (k < first || k >= last) continue;
      st.traj.samples.push_back({dt * static_cast<double>(k), p + cfg.noise_std * e});
    }
    out.push_back(std::move(st));
  }
  return out;
}

std::vector<RawTrajectory> raw_trajectories(const std::vector<SyntheticTrajectory>& synth) {
  std::vector<RawTrajectory> out;
  out.reserve(synth.size());
  for (const auto& s : synth) out.push_back(s.traj);
  return out;
}

EpisodeSplit split_episodes(std::size_t n, std::size_t batch_size, std::uint64_t split_seed, std::uint64_t trial_seed,
                            double test_fraction) {
  if (batch_size < 1) throw DataError("batch size must be >= 1");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw DataError("test fraction must lie in [0, 1)");
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n - n_test < batch_size) throw DataError("dataset is smaller than one batch");
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 split_rng(mix_seed(split_seed, 0x5e1));
  std::shuffle(all.begin(), all.end(), split_rng);
  EpisodeSplit out;
  out.test.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::sort(out.test.begin(), out.test.end());
  std::vector<std::size_t> train(all.begin() + static_cast<std::ptrdiff_t>(n_test), all.end());
  std::sort(train.begin(), train.end());
  std::mt19937_64 trial_rng(mix_seed(trial_seed, 0x7a1));
  std::shuffle(train.begin(), train.end(), trial_rng);
  for (std::size_t k = 0; k < train.size(); k += batch_size) {
    out.batches.emplace_back(train.begin() + static_cast<std::ptrdiff_t>(k),
                             train.begin() + static_cast<std::ptrdiff_t>(std::min(train.size(), k + batch_size)));
  }
  return out;
}

double distance_to_polyline(const Vec2& p, const std::vector<Vec2>& poly) {
  if (poly.empty()) throw DataError("distance to an empty polyline");
  double best = (p - poly.front()).norm();
  for (std::size_t k = 1; k < poly.size(); ++k) {
    const Vec2 d = poly[k] - poly[k - 1];
    const double len2 = d.squaredNorm();
    const double f = len2 > 0.0 ? std::clamp((p - poly[k - 1]).dot(d) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (p - (poly[k - 1] + f * d)).norm());
  }
  return best;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace sila
