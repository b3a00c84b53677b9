#include "sila/dictionary.hpp"
#include "sila/error.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sila;

namespace {

constexpr int kCells = 30;

GridVector horizontal(std::vector<int> cells, Vec2 dir = {1, 0}) {
  std::vector<CellVelocity> cv;
  for (int c : cells) cv.push_back({c, dir.normalized()});
  return GridVector(kCells, std::move(cv));
}

double cosine(const CellField& a, const CellField& b) {
  const Eigen::VectorXd x = a.to_dense(), y = b.to_dense();
  return x.dot(y) / (x.norm() * y.norm());
}

Dictionary dict_of(std::vector<CellField> fields) {
  Dictionary d;
  for (auto& f : fields) d.atoms.push_back({d.size() + 1, std::move(f)});
  return d;
}

std::vector<GridVector> random_vectors(std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> ang(0, 2 * M_PI);
  std::uniform_int_distribution<int> start(0, kCells - 8), len(3, 8);
  std::vector<GridVector> out;
  for (int i = 0; i < count; ++i) {
    const int s = start(rng);
    const int l = len(rng);
    const double h = ang(rng);
    std::vector<CellVelocity> cv;
    for (int c = s; c < s + l; ++c) cv.push_back({c, Vec2(std::cos(h + 0.1 * c), std::sin(h + 0.1 * c))});
    out.emplace_back(kCells, std::move(cv));
  }
  return out;
}

}  // namespace

TEST_CASE("repeated vector collapses to a single atom") {
  const std::vector<GridVector> ys(10, horizontal({3, 4, 5, 9}));
  SparseCodingConfig cfg;
  cfg.max_atoms = 4;
  cfg.lambda = 1e-3;
  const auto r = learn_dictionary(ys, cfg);
  REQUIRE(r.dictionary.size() == 1);
  CHECK(cosine(r.dictionary.atom(1).field, ys[0]) >= 0.999);
}

TEST_CASE("two disjoint clusters give two atoms aligned with the cluster means") {
  std::vector<GridVector> ys;
  for (int i = 0; i < 6; ++i) ys.push_back(horizontal({0, 1, 2, 3}));
  for (int i = 0; i < 6; ++i) ys.push_back(horizontal({20, 21, 22}, {0, -1}));
  SparseCodingConfig cfg;
  cfg.max_atoms = 6;
  const auto r = learn_dictionary(ys, cfg);
  REQUIRE(r.dictionary.size() == 2);
  // Per-cluster closed form: the best rank-one fit of identical columns is the column itself.
  for (const auto& mean : {ys[0], ys[6]}) {
    double best = 0.0;
    for (const auto& a : r.dictionary.atoms) best = std::max(best, cosine(a.field, mean));
    CHECK(best >= 0.99);
  }
}

TEST_CASE("learn_dictionary input validation") {
  CHECK_THROWS_AS(learn_dictionary(std::vector<GridVector>{}, {}), DataError);
  CHECK_THROWS_AS(learn_dictionary(std::vector<GridVector>{GridVector(kCells)}, {}), DataError);
  std::vector<GridVector> mixed{horizontal({1}), GridVector(kCells + 1, {{0, {1, 0}}})};
  CHECK_THROWS_AS(learn_dictionary(mixed, {}), DataError);
}

TEST_CASE("objective never increases within a pruning round") {
  std::mt19937_64 rng(23);
  const auto ys = random_vectors(rng, 60);
  SparseCodingConfig cfg;
  cfg.max_atoms = 12;
  cfg.max_iters = 50;
  cfg.tol = 1e-300;
  cfg.seed = 4;
  const auto r = learn_dictionary(ys, cfg);
  REQUIRE(!r.round_starts.empty());
  for (std::size_t k = 1; k < r.objective_trace.size(); ++k) {
    const bool starts_round =
        std::find(r.round_starts.begin(), r.round_starts.end(), k) != r.round_starts.end();
    if (starts_round) continue;
    CHECK(r.objective_trace[k] <= r.objective_trace[k - 1] * (1.0 + 1e-12));
  }
}

TEST_CASE("learned dictionaries are well formed and deterministic") {
  std::mt19937_64 rng(8);
  const auto ys = random_vectors(rng, 50);
  SparseCodingConfig cfg;
  cfg.seed = 99;
  const auto a = learn_dictionary(ys, cfg);
  const auto b = learn_dictionary(ys, cfg);
  CHECK_NOTHROW(a.dictionary.validate());
  CHECK(a.dictionary.size() <= cfg.max_atoms);
  REQUIRE(a.dictionary.size() == b.dictionary.size());
  for (int k = 1; k <= a.dictionary.size(); ++k) CHECK(a.dictionary.atom(k).field == b.dictionary.atom(k).field);
  CHECK(a.coefficients == b.coefficients);
  CHECK(a.coefficients.rows() == a.dictionary.size());
  CHECK(a.coefficients.cols() == 50);
  CHECK((a.coefficients.array() >= 0.0).all());
  for (const auto& atom : a.dictionary.atoms)
    for (const auto& c : atom.field.cells()) CHECK(c.v.norm() == doctest::Approx(1.0));
}

TEST_CASE("sparse_code reconstructs an atom exactly") {
  const auto d = dict_of({horizontal({1, 2, 3}), horizontal({3, 4, 5}, {0, 1}), horizontal({10, 11})});
  const auto c = sparse_code(d.atom(2).field, d, 1e-12);
  CHECK(c(0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(std::abs(c(1) - 1.0) < 1e-6);
  CHECK(std::abs(c(2)) < 1e-6);
  CHECK(sparse_code(GridVector(kCells), d, 0.1).isZero(0.0));
  CHECK_THROWS_AS(sparse_code(GridVector(kCells + 1), d, 0.1), DataError);
  CHECK_THROWS_AS(sparse_code(GridVector(kCells), Dictionary{}, 0.1), DataError);
}

TEST_CASE("two-atom sparse_code matches an exhaustive grid search") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> coef(0.2, 1.5), noise(-0.2, 0.2);
  for (int trial = 0; trial < 5; ++trial) {
    const auto atoms = random_vectors(rng, 2);
    const auto d = dict_of({atoms[0], atoms[1]});
    const Eigen::VectorXd truth = coef(rng) * atoms[0].to_dense() + coef(rng) * atoms[1].to_dense();
    Eigen::VectorXd yd = truth;
    for (Eigen::Index k = 0; k < yd.size(); ++k)
      if (yd(k) != 0.0) yd(k) += noise(rng);
    const auto y = CellField::from_dense(yd);
    const double lambda = 0.05;

    Eigen::MatrixXd D(yd.size(), 2);
    D << atoms[0].to_dense(), atoms[1].to_dense();
    auto f = [&](double c0, double c1) {
      return (yd - D * Eigen::Vector2d(c0, c1)).squaredNorm() + lambda * (c0 + c1);
    };
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 2000; ++i)
      for (int j = 0; j <= 2000; ++j) best = std::min(best, f(1e-3 * i, 1e-3 * j));

    const auto c = sparse_code(y, d, lambda);
    CHECK((c.array() >= 0.0).all());
    const double got = f(c(0), c(1));
    CHECK(got <= best + 1e-9);
    CHECK(best - got < 1e-4);
  }
}

TEST_CASE("objective evaluation") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  Eigen::MatrixXd Y(6, 4), D(6, 3), C(3, 4);
  for (auto* m : {&Y, &D, &C})
    for (Eigen::Index k = 0; k < m->size(); ++k) m->data()[k] = g(rng);
  CHECK(objective(Y, D, Eigen::MatrixXd::Zero(3, 4), 0.7) == doctest::Approx(Y.squaredNorm()).epsilon(1e-15));
  CHECK(objective(D * C, D, C, 0.0) == 0.0);

  double dense = 0.0;
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 4; ++c) {
      double rec = 0.0;
      for (int a = 0; a < 3; ++a) rec += D(r, a) * C(a, c);
      dense += (Y(r, c) - rec) * (Y(r, c) - rec);
    }
  }
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < 4; ++c) dense += 0.3 * std::abs(C(a, c));
  CHECK(std::abs(objective(Y, D, C, 0.3) - dense) < 1e-12);
  CHECK_THROWS_AS(objective(Y, D, Eigen::MatrixXd::Zero(2, 4), 0.3), DataError);
}
