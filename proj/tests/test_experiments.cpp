#include "sila/error.hpp"
#include "sila/experiments.hpp"
#include "sila/fusion.hpp"

#include <doctest.h>

#include <Eigen/QR>

#include <cmath>
#include <random>

using namespace sila;

namespace {

std::vector<NormalizedTrajectory> dataset(int n, std::uint64_t seed) {
  const auto setup = make_template(CornerKind::right, seed);
  ScenarioConfig sc;
  sc.n_trajectories = n;
  sc.seed = seed;
  std::vector<NormalizedTrajectory> out;
  for (const auto& t : generate_trajectories(setup, sc)) out.push_back(to_common_frame(t.traj, setup.frame));
  return out;
}

SuiteConfig small_suite() {
  SuiteConfig cfg;
  cfg.batch_size = 15;
  cfg.trials = 2;
  cfg.max_episodes = 3;
  cfg.base_seed = 5;
  cfg.learn = experiment_learn_config();
  cfg.learn.gp.max_iters = 10;
  cfg.timing = false;
  return cfg;
}

double oracle_slope(const std::vector<double>& x, const std::vector<double>& y) {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(x.size()), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    A(static_cast<Eigen::Index>(i), 0) = 1.0;
    A(static_cast<Eigen::Index>(i), 1) = x[i];
    b(static_cast<Eigen::Index>(i)) = y[i];
  }
  return A.colPivHouseholderQr().solve(b)(1);
}

}  // namespace

TEST_CASE("method labels and parsing") {
  CHECK(MethodSpec{MethodKind::batch, 1.0}.label() == "batch");
  CHECK(MethodSpec{MethodKind::standard, 1.0}.label() == "standard");
  CHECK(MethodSpec{MethodKind::sila, 0.7}.label() == "sila:0.7");
  CHECK(MethodSpec{MethodKind::sila, 1.0}.label() == "sila:1.0");
  const auto ms = parse_methods("batch,standard,sila:0.5,sila");
  REQUIRE(ms.size() == 4);
  CHECK(ms[0].kind == MethodKind::batch);
  CHECK(ms[1].kind == MethodKind::standard);
  CHECK(ms[2] == MethodSpec{MethodKind::sila, 0.5});
  CHECK(ms[3] == MethodSpec{MethodKind::sila, 0.7});
  CHECK_THROWS_AS(parse_methods("batch,magic"), DataError);
  CHECK_THROWS_AS(parse_methods("sila:1.5"), DataError);
  CHECK_THROWS_AS(parse_methods("sila:abc"), DataError);
  CHECK_THROWS_AS(parse_methods(""), DataError);
}

TEST_CASE("least-squares slope") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(i * 20.0);
    y.push_back(0.3 * x.back() + 5.0 + g(rng));
  }
  CHECK(std::abs(ls_slope(x, y) - oracle_slope(x, y)) < 1e-12);
  CHECK_THROWS_AS(ls_slope(std::vector<double>{1, 1}, std::vector<double>{1, 2}), DataError);
  CHECK_THROWS_AS(ls_slope(std::vector<double>{1}, std::vector<double>{1, 2}), DataError);
}

TEST_CASE("summaries") {
  std::vector<EpisodeRecord> rs;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 1; trial <= 3; ++trial)
    for (int e = 1; e <= 4; ++e)
      for (const char* m : {"a", "b"})
        rs.push_back({m, trial, e, u(rng), e * 3 + trial, e * 4, 20 * e, u(rng)});
  const auto s = summarize(rs);
  REQUIRE(s.rows.size() == 8);
  for (const auto& row : s.rows) {
    std::vector<double> mhd, prim;
    for (const auto& r : rs)
      if (r.method == row.method && r.episode == row.episode) {
        mhd.push_back(r.weighted_mhd);
        prim.push_back(r.primitives);
      }
    double mean = 0.0;
    for (double v : mhd) mean += v;
    mean /= static_cast<double>(mhd.size());
    double var = 0.0;
    for (double v : mhd) var += (v - mean) * (v - mean);
    CHECK(row.trials == 3);
    CHECK(std::abs(row.mhd_mean - mean) < 1e-12);
    CHECK(std::abs(row.mhd_std - std::sqrt(var / 3.0)) < 1e-12);
    CHECK(std::abs(row.primitives_mean - (prim[0] + prim[1] + prim[2]) / 3.0) < 1e-12);
    CHECK(row.total_mean == doctest::Approx(row.primitives_mean + row.transitions_mean));
  }
  std::vector<double> x, y;
  for (const auto& r : rs)
    if (r.method == "a") {
      x.push_back(r.cumulative_trajectories);
      y.push_back(r.total_size());
    }
  CHECK(std::abs(s.growth_rate.at("a") - oracle_slope(x, y)) < 1e-12);

  std::vector<EpisodeRecord> single(rs.begin(), rs.begin() + 2);
  const auto one = summarize(single);
  for (const auto& row : one.rows) {
    CHECK(row.mhd_std == 0.0);
    CHECK(row.total_std == 0.0);
  }
  CHECK(one.growth_rate.empty());
  CHECK_THROWS_AS(summarize(std::vector<EpisodeRecord>{}), DataError);
}

TEST_CASE("episode suite") {
  const auto data = dataset(80, 3);
  const auto grid = GridSpec::fit(data);
  const auto methods = parse_methods("batch,standard,sila:0.7,sila:1.0");
  const auto cfg = small_suite();
  const auto rs = run_episode_suite(data, grid, methods, cfg);
  REQUIRE(rs.size() == 2 * 3 * 4);

  auto find = [&](const std::string& m, int trial, int e) -> const EpisodeRecord& {
    for (const auto& r : rs)
      if (r.method == m && r.trial == trial && r.episode == e) return r;
    throw std::runtime_error("missing record");
  };
  for (int trial = 1; trial <= 2; ++trial) {
    const auto& first = find("batch", trial, 1);
    for (const char* m : {"standard", "sila:0.7", "sila:1.0"}) {
      const auto& r = find(m, trial, 1);
      CHECK(r.weighted_mhd == first.weighted_mhd);
      CHECK(r.primitives == first.primitives);
      CHECK(r.transitions == first.transitions);
    }
    for (int e = 1; e <= 3; ++e) {
      const auto& std_r = find("standard", trial, e);
      CHECK(find("sila:0.7", trial, e).primitives <= std_r.primitives);
      CHECK(find("sila:1.0", trial, e).total_size() == std_r.total_size());
      CHECK(std_r.cumulative_trajectories == 15 * e);
      CHECK(std_r.learn_time_s == 0.0);
    }
  }
  CHECK(run_episode_suite(data, grid, methods, cfg) == rs);
  CHECK_THROWS_AS(run_episode_suite(data, grid, {}, cfg), DataError);

  auto bad = cfg;
  bad.timing_repeats = 0;
  CHECK_THROWS_AS(run_episode_suite(data, grid, methods, bad), DataError);
}

TEST_CASE("repeated timing keeps the models and records positive times") {
  const auto data = dataset(50, 4);
  const auto grid = GridSpec::fit(data);
  const auto methods = parse_methods("batch,sila:0.7");
  auto cfg = small_suite();
  cfg.trials = 1;
  cfg.max_episodes = 2;
  const auto plain = run_episode_suite(data, grid, methods, cfg);
  cfg.timing = true;
  cfg.timing_repeats = 3;
  auto timed_rs = run_episode_suite(data, grid, methods, cfg);
  REQUIRE(timed_rs.size() == plain.size());
  for (auto& r : timed_rs) {
    CHECK(r.learn_time_s > 0.0);
    r.learn_time_s = 0.0;
  }
  CHECK(timed_rs == plain);
}

TEST_CASE("multi-intersection suite visits every intersection once") {
  std::vector<IntersectionSetup> setups;
  const CornerKind kinds[] = {CornerKind::right, CornerKind::open, CornerKind::closed, CornerKind::right,
                              CornerKind::open};
  for (std::uint64_t s = 0; s < 5; ++s) setups.push_back(make_template(kinds[s], 10 + s));
  MultiIntersectionConfig cfg;
  cfg.train_per_intersection = 15;
  cfg.test_per_intersection = 4;
  cfg.suite = small_suite();
  cfg.suite.trials = 1;
  const auto methods = parse_methods("standard,sila:0.7");
  const auto rs = multi_intersection_suite(setups, methods, cfg);
  CHECK(rs.size() == 5 * 2);
  for (const auto& r : rs) {
    CHECK(r.episode >= 1);
    CHECK(r.episode <= 5);
    CHECK(r.cumulative_trajectories == 15 * r.episode);
  }
  CHECK_THROWS_AS(multi_intersection_suite({setups[0]}, methods, cfg), DataError);
}

TEST_CASE("straight walks look alike across corner angles in the common frame") {
  auto straight_primitive = [](CornerKind kind, std::uint64_t seed) {
    const auto setup = make_template(kind, seed);
    ScenarioConfig sc;
    sc.noise_std = 0.0;
    sc.truncate_prob = 0.0;
    sc.reverse_prob = 0.0;
    sc.behavior_mix = {1.0, 0.0, 0.0, 0.0};
    sc.n_trajectories = 20;
    sc.seed = seed;
    const GridSpec grid{25, 29, Vec2(-3.0, -3.0), 0.3};
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(2 * grid.size());
    for (const auto& t : generate_trajectories(setup, sc))
      sum += vectorize(resample(to_common_frame(t.traj, setup.frame), 0.4), grid).to_dense();
    return MotionPrimitive{1, CellField::from_dense(sum / 20.0)};
  };
  const auto right = straight_primitive(CornerKind::right, 1);
  const auto open = straight_primitive(CornerKind::open, 2);
  const auto closed = straight_primitive(CornerKind::closed, 3);
  CHECK(similarity(right, open) >= 0.7);
  CHECK(similarity(right, closed) >= 0.7);
}

TEST_CASE("experiment learning configuration") {
  const auto cfg = experiment_learn_config();
  const LearnConfig lib;
  CHECK(cfg.gp.max_iters < lib.gp.max_iters);
  CHECK(cfg.coding.max_iters < lib.coding.max_iters);
  CHECK(cfg.dt == lib.dt);
}
