#include "sila/error.hpp"
#include "sila/fusion.hpp"
#include "sila/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sila;

namespace {

double brute_mhd(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  auto directed = [](const std::vector<Vec2>& x, const std::vector<Vec2>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double best = INFINITY;
      for (std::size_t j = 0; j < y.size(); ++j) {
        const double dx = x[i].x() - y[j].x(), dy = x[i].y() - y[j].y();
        best = std::min(best, std::sqrt(dx * dx + dy * dy));
      }
      s += best;
    }
    return s / static_cast<double>(x.size());
  };
  return std::max(directed(a, b), directed(b, a));
}

std::vector<Vec2> random_set(std::mt19937_64& rng, int max_n) {
  std::uniform_int_distribution<int> n(1, max_n);
  std::normal_distribution<double> g(0.0, 3.0);
  std::vector<Vec2> out(static_cast<std::size_t>(n(rng)));
  for (auto& p : out) p = Vec2(g(rng), g(rng));
  return out;
}

Hypothesis hyp(std::vector<Vec2> path, double w) { return {std::move(path), {1}, 0.0, w}; }

Model sized_model(int atoms, int edges) {
  Model m;
  m.grid = GridSpec{1, 4, Vec2::Zero(), 1.0};
  for (int k = 1; k <= atoms; ++k) m.dict.atoms.push_back({k, CellField(4, {{0, {1, 0}}})});
  for (int e = 0; e < edges; ++e) m.transitions.push_back({1 + e % atoms, 1 + (e / atoms) % atoms, 1, {}, {}});
  return m;
}

}  // namespace

TEST_CASE("mhd examples") {
  const std::vector<Vec2> a{{0, 0}}, b{{3, 4}};
  CHECK(mhd(a, b) == 5.0);
  const std::vector<Vec2> c{{1, 2}, {3, -1}, {0.5, 0.5}};
  CHECK(mhd(c, c) == 0.0);
  const std::vector<Vec2> d{{0, 0}, {1, 0}}, e{{0, 1}};
  CHECK(mhd(d, e) == doctest::Approx(1.20711).epsilon(1e-5));
  CHECK(std::abs(mhd(d, e) - (1.0 + std::sqrt(2.0)) / 2.0) < 1e-15);
  CHECK_THROWS_AS(mhd(std::vector<Vec2>{}, e), DataError);
}

TEST_CASE("mhd matches a double loop and is a symmetric semimetric") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = random_set(rng, 12), b = random_set(rng, 12);
    const double d = mhd(a, b);
    CHECK(std::abs(d - brute_mhd(a, b)) < 1e-12);
    CHECK(d == mhd(b, a));
    CHECK(d >= 0.0);
  }
}

TEST_CASE("weighted mhd") {
  const std::vector<Vec2> truth{{0, 0}, {1, 0}};
  SUBCASE("single hypothesis is plain mhd") {
    const std::vector<Vec2> path{{0, 1}, {1, 1.5}};
    CHECK(weighted_mhd({{hyp(path, 1.0)}}, truth) == mhd(path, truth));
  }
  SUBCASE("convex combination") {
    const std::vector<Vec2> p1{{0, 1}, {1, 1}}, p3{{0, 3}, {1, 3}};
    CHECK(weighted_mhd({{hyp(p1, 0.5), hyp(p3, 0.5)}}, truth) == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("random four-hypothesis sums") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      const auto t = random_set(rng, 10);
      PredictionSet ps;
      double z = 0.0;
      for (int h = 0; h < 4; ++h) {
        ps.hypotheses.push_back(hyp(random_set(rng, 10), u(rng)));
        z += ps.hypotheses.back().weight;
      }
      double expect = 0.0;
      for (auto& h : ps.hypotheses) {
        h.weight /= z;
        expect += h.weight * brute_mhd(h.path, t);
      }
      CHECK(std::abs(weighted_mhd(ps, t) - expect) < 1e-12);
    }
  }
  CHECK_THROWS_AS(weighted_mhd({}, truth), DataError);
}

TEST_CASE("model size") {
  CHECK(model_size(Model{}).total() == 0);
  const auto m8 = sized_model(8, 11);
  CHECK(model_size(m8).primitives == 8);
  CHECK(model_size(m8).transitions == 11);
  CHECK(model_size(m8).total() == 19);
  const auto both = standard_accumulate(m8, sized_model(5, 7));
  CHECK(model_size(both).primitives == 13);
  CHECK(model_size(both).transitions == 18);
  CHECK(model_size(both).total() == 31);
}

TEST_CASE("timed measures wall time") {
  const double none = timed([] {});
  CHECK(none >= 0.0);
  CHECK(none < 0.01);
  const auto [value, busy] = timed([] {
    const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(100);
    long spins = 0;
    while (std::chrono::steady_clock::now() < until) ++spins;
    return spins;
  });
  CHECK(value > 0);
  CHECK(busy == doctest::Approx(0.1).epsilon(0.5));
}

TEST_CASE("evaluate") {
  std::vector<NormalizedTrajectory> test;
  for (int t = 0; t < 3; ++t) {
    NormalizedTrajectory tr{"t" + std::to_string(t), {}};
    for (int k = 0; k < 30; ++k) tr.samples.push_back({0.4 * k, Vec2(0.4 * k, 0.1 * t)});
    test.push_back(tr);
  }
  test.push_back({"short", {{0.0, Vec2(0, 0)}, {0.4, Vec2(0.4, 0)}, {0.8, Vec2(0.8, 0)}}});

  SUBCASE("an empty model falls back to standing still") {
    const auto r = evaluate(Model{}, test, {});
    REQUIRE(r.per_trajectory.size() == 3);
    std::vector<Vec2> truth;
    for (int k = 8; k < 20; ++k) truth.push_back(Vec2(0.4 * k, 0));
    const std::vector<Vec2> still(12, Vec2(0.4 * 7, 0));
    for (const auto& s : r.per_trajectory) {
      CHECK(s.fallback);
      CHECK(std::abs(s.weighted_mhd - brute_mhd(still, truth)) < 1e-12);
    }
    CHECK(r.weighted_mhd_mean == doctest::Approx(brute_mhd(still, truth)).epsilon(1e-12));
  }
  SUBCASE("truth stops where the trajectory ends") {
    std::vector<NormalizedTrajectory> one{test[0]};
    one[0].samples.resize(11);
    const auto r = evaluate(Model{}, one, {});
    REQUIRE(r.per_trajectory.size() == 1);
    const std::vector<Vec2> truth{{3.2, 0}, {3.6, 0}, {4.0, 0}};
    const std::vector<Vec2> still(3, Vec2(2.8, 0));
    CHECK(std::abs(r.per_trajectory[0].weighted_mhd - brute_mhd(still, truth)) < 1e-12);
  }
  CHECK_THROWS_AS(evaluate(Model{}, test, EvalConfig{{}, 0.1}), DataError);
}
