#include "sila/error.hpp"
#include "sila/synth.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <map>
#include <numeric>
#include <set>

using namespace sila;

TEST_CASE("templates") {
  const auto r = make_template(CornerKind::right, 7);
  CHECK(r.tpl.corner_angle == 90.0);
  CHECK(make_template(CornerKind::open, 7).tpl.corner_angle == 120.0);
  CHECK(make_template(CornerKind::closed, 7).tpl.corner_angle == 60.0);
  CHECK(r.tpl.sidewalk_width >= 2.0);
  CHECK(r.tpl.sidewalk_width <= 4.0);
  CHECK(r.frame.sidewalk_width == r.tpl.sidewalk_width);
  for (auto kind : {CornerKind::right, CornerKind::open, CornerKind::closed}) {
    const auto s = make_template(kind, 3);
    const double angle = std::acos(s.frame.axis1.dot(s.frame.axis2)) * 180.0 / std::numbers::pi;
    CHECK(angle == doctest::Approx(s.tpl.corner_angle).epsilon(1e-9));
    CHECK_NOTHROW(s.frame.validate());
  }
  const auto again = make_template(CornerKind::right, 7);
  CHECK(again.frame.origin == r.frame.origin);
  CHECK(again.frame.axis1 == r.frame.axis1);
  CHECK(again.tpl.sidewalk_width == r.tpl.sidewalk_width);
  CHECK(make_template(CornerKind::right, 8).frame.origin != r.frame.origin);
  CHECK(parse_corner_kind("open") == CornerKind::open);
  CHECK(to_string(CornerKind::closed) == "closed");
  CHECK_THROWS_AS(parse_corner_kind("square"), DataError);
}

TEST_CASE("generation counts, ids and timing") {
  const auto setup = make_template(CornerKind::right, 1);
  ScenarioConfig cfg;
  cfg.seed = 42;
  const auto ts = generate_trajectories(setup, cfg);
  REQUIRE(ts.size() == 200);
  std::set<std::string> ids;
  for (const auto& t : ts) {
    ids.insert(t.traj.id);
    CHECK(t.traj.frame_id == setup.frame.name);
    CHECK_NOTHROW(validate_samples(t.traj.samples, t.traj.id));
    for (std::size_t k = 1; k < t.traj.samples.size(); ++k)
      CHECK(t.traj.samples[k].t - t.traj.samples[k - 1].t == doctest::Approx(0.4).epsilon(1e-12));
  }
  CHECK(ids.size() == 200);
  const auto again = generate_trajectories(setup, cfg);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    REQUIRE(again[i].traj.samples.size() == ts[i].traj.samples.size());
    for (std::size_t k = 0; k < ts[i].traj.samples.size(); ++k)
      CHECK(again[i].traj.samples[k].p == ts[i].traj.samples[k].p);
  }
  // The first trajectories do not change when more are requested.
  cfg.n_trajectories = 250;
  const auto more = generate_trajectories(setup, cfg);
  CHECK(more[199].traj.samples.back().p == ts[199].traj.samples.back().p);
}

TEST_CASE("noise-free samples lie on the nominal route") {
  const auto setup = make_template(CornerKind::open, 2);
  ScenarioConfig cfg;
  cfg.noise_std = 0.0;
  cfg.n_trajectories = 60;
  for (const auto& t : generate_trajectories(setup, cfg))
    for (const auto& s : t.traj.samples) CHECK(distance_to_polyline(s.p, t.nominal) < 1e-9);
}

TEST_CASE("sample deviation from the route follows the noise level") {
  const auto setup = make_template(CornerKind::right, 5);
  ScenarioConfig cfg;
  cfg.n_trajectories = 500;
  cfg.noise_std = 0.1;
  cfg.seed = 9;
  double sum = 0.0, sum_sq = 0.0;
  long n = 0;
  for (const auto& t : generate_trajectories(setup, cfg)) {
    for (const auto& s : t.traj.samples) {
      const double d = distance_to_polyline(s.p, t.nominal);
      sum += d;
      sum_sq += d * d;
      ++n;
    }
  }
  // The offset across the route is N(0, sigma^2): RMS sigma, mean sigma * sqrt(2 / pi).
  CHECK(std::sqrt(sum_sq / n) == doctest::Approx(0.1).epsilon(0.1));
  CHECK(sum / n == doctest::Approx(0.1 * std::sqrt(2.0 / std::numbers::pi)).epsilon(0.1));
}

TEST_CASE("routes in the common frame") {
  const auto setup = make_template(CornerKind::closed, 4);
  ScenarioConfig cfg;
  cfg.noise_std = 0.0;
  cfg.truncate_prob = 0.0;
  cfg.reverse_prob = 0.0;
  cfg.n_trajectories = 120;
  std::map<Behavior, int> seen;
  for (const auto& t : generate_trajectories(setup, cfg)) {
    ++seen[t.behavior];
    const auto n = to_common_frame(t.traj, setup.frame);
    const Vec2 first = n.samples.front().p, last = n.samples.back().p;
    switch (t.behavior) {
      case Behavior::straight1:
        CHECK(first.x() == doctest::Approx(5.0).epsilon(1e-9));
        CHECK(std::abs(first.y() - 0.5) <= cfg.lateral_spread + 1e-9);
        for (const auto& s : n.samples) CHECK(s.p.y() == doctest::Approx(first.y()).epsilon(1e-9));
        break;
      case Behavior::straight2:
        CHECK(first.y() == doctest::Approx(5.0).epsilon(1e-9));
        CHECK(std::abs(first.x() - 0.5) <= cfg.lateral_spread + 1e-9);
        break;
      case Behavior::corner_turn:
        CHECK(first.x() == doctest::Approx(5.0).epsilon(1e-9));
        CHECK(last.y() > 4.0);
        break;
      case Behavior::cross:
        CHECK(first.x() == doctest::Approx(5.0).epsilon(1e-9));
        CHECK(last.y() < -1.5);
        break;
    }
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("truncation shortens trajectories") {
  const auto setup = make_template(CornerKind::right, 6);
  ScenarioConfig full, cut;
  full.truncate_prob = 0.0;
  cut.truncate_prob = 1.0;
  const auto a = generate_trajectories(setup, full);
  const auto b = generate_trajectories(setup, cut);
  int shorter = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double na = static_cast<double>(a[i].traj.samples.size());
    const double nb = static_cast<double>(b[i].traj.samples.size());
    CHECK(nb <= na);
    CHECK(nb >= std::floor(0.6 * na) - 1);
    shorter += nb < na;
  }
  CHECK(shorter > 150);
}

TEST_CASE("scenario validation") {
  const auto setup = make_template(CornerKind::right, 1);
  ScenarioConfig bad;
  bad.behavior_mix = {0.5, 0.5, 0.5, 0.0};
  CHECK_THROWS_AS(generate_trajectories(setup, bad), DataError);
  ScenarioConfig neg;
  neg.noise_std = -1.0;
  CHECK_THROWS_AS(generate_trajectories(setup, neg), DataError);
  ScenarioConfig none;
  none.n_trajectories = 0;
  CHECK(generate_trajectories(setup, none).empty());
}

TEST_CASE("episode split") {
  const auto s = split_episodes(988, 20, 1, 2);
  CHECK(s.test.size() == 148);
  CHECK(s.batches.size() == 42);
  std::vector<std::size_t> all = s.test;
  for (const auto& b : s.batches) {
    CHECK(b.size() == 20);
    all.insert(all.end(), b.begin(), b.end());
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(988);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);

  const auto t = split_episodes(988, 20, 1, 3);
  CHECK(t.test == s.test);
  CHECK(t.batches != s.batches);
  std::vector<std::size_t> train_s, train_t;
  for (const auto& b : s.batches) train_s.insert(train_s.end(), b.begin(), b.end());
  for (const auto& b : t.batches) train_t.insert(train_t.end(), b.begin(), b.end());
  std::sort(train_s.begin(), train_s.end());
  std::sort(train_t.begin(), train_t.end());
  CHECK(train_s == train_t);

  CHECK(split_episodes(100, 30, 1, 1).batches.back().size() == 25);
  CHECK(split_episodes(988, 20, 5, 2).test != s.test);
  CHECK_THROWS_AS(split_episodes(10, 20, 1, 1), DataError);
  CHECK_THROWS_AS(split_episodes(10, 0, 1, 1), DataError);
}

TEST_CASE("polyline distance and seed mixing") {
  const std::vector<Vec2> poly{{0, 0}, {2, 0}, {2, 2}};
  CHECK(distance_to_polyline({1, 1}, poly) == 1.0);
  CHECK(distance_to_polyline({3, 3}, poly) == doctest::Approx(std::sqrt(2.0)));
  CHECK(distance_to_polyline({-1, 0}, poly) == 1.0);
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
  CHECK(mix_seed(1, 2) != mix_seed(1, 3));
  CHECK(mix_seed(1, 2) != mix_seed(2, 2));
}
