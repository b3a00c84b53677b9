#include "sila/dictionary.hpp"

#include "sila/error.hpp"
#include "sila/log.hpp"

#include <Eigen/SparseCore>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sila {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

constexpr double kUsageEps = 1e-8;
constexpr double kCdTol = 1e-10;
constexpr int kCdMaxSweeps = 1000;
constexpr int kMaxRounds = 64;
// Columns with more than this share of their energy unexplained may take
// over an unused atom.
constexpr double kReseedResidualFraction = 0.5;

/// Nonnegative cyclic coordinate descent on 0.5 c'Gc - b'c + (lambda/2) sum c,
/// warm-started from c.
void coordinate_descent(const Eigen::MatrixXd& G, const Eigen::Ref<const Eigen::VectorXd>& b,
                        double lambda, Eigen::Ref<Eigen::VectorXd> c) {
  const Eigen::Index L = G.rows();
  Eigen::VectorXd h = G * c - b;
  for (int sweep = 0; sweep < kCdMaxSweeps; ++sweep) {
    double max_delta = 0.0;
    double max_c = 1.0;
    for (Eigen::Index a = 0; a < L; ++a) {
      const double gaa = G(a, a);
      if (!(gaa > 0.0)) continue;
      const double updated = std::max(0.0, c(a) - (h(a) + 0.5 * lambda) / gaa);
      const double delta = updated - c(a);
      if (delta != 0.0) {
        h += G.col(a) * delta;
        c(a) = updated;
      }
      max_delta = std::max(max_delta, std::abs(delta));
      max_c = std::max(max_c, c(a));
    }
    if (max_delta <= kCdTol * max_c) break;
  }
}

struct Learner {
  const SpMat& Y;
  double lambda;
  double y_sq;  // ||Y||_F^2
  Eigen::MatrixXd D;
  Eigen::MatrixXd C;
  Eigen::MatrixXd G;  // D'D
  Eigen::MatrixXd B;  // D'Y

  void refresh_products() {
    G = D.transpose() * D;
    B = (Y.transpose() * D).transpose();
  }

  double current_objective() const {
    // ||Y||^2 - 2 <C, D'Y> + <C, D'D C> + lambda sum C
    return y_sq - 2.0 * (C.array() * B.array()).sum() + (C.array() * (G * C).array()).sum() +
           lambda * C.sum();
  }

  void code_all() {
    for (Eigen::Index i = 0; i < C.cols(); ++i) coordinate_descent(G, B.col(i), lambda, C.col(i));
  }

  void update_atoms() {
    const Eigen::MatrixXd E = C * C.transpose();
    const Eigen::MatrixXd F = Y * C.transpose();
    for (Eigen::Index a = 0; a < D.cols(); ++a) {
      if (!(E(a, a) > 0.0)) continue;
      Eigen::VectorXd u = D.col(a) + (F.col(a) - D * E.col(a)) / E(a, a);
      const double n = u.norm();
      if (n > 1.0) u /= n;
      D.col(a) = u;
    }
  }

  Eigen::VectorXi usage() const {
    Eigen::VectorXi u(C.rows());
    for (Eigen::Index a = 0; a < C.rows(); ++a) u(a) = static_cast<int>((C.row(a).array() > kUsageEps).count());
    return u;
  }

  /// Moves unused atoms onto the residual of the worst-explained columns.
  /// Unused atoms carry zero coefficients, so the objective is unchanged.
  void reseed_unused() {
    const Eigen::VectorXi use = usage();
    std::vector<Eigen::Index> dead;
    for (Eigen::Index a = 0; a < use.size(); ++a) {
      if (use(a) == 0) dead.push_back(a);
    }
    if (dead.empty()) return;

    std::vector<std::pair<double, Eigen::Index>> unexplained;
    for (Eigen::Index i = 0; i < C.cols(); ++i) {
      const double yy = Y.col(i).squaredNorm();
      if (!(yy > 0.0)) continue;
      const auto c = C.col(i);
      const double rr = yy - 2.0 * c.dot(B.col(i)) + c.dot(G * c);
      const double frac = rr / yy;
      if (frac > kReseedResidualFraction) unexplained.emplace_back(-frac, i);
    }
    std::sort(unexplained.begin(), unexplained.end());
    const std::size_t n = std::min(dead.size(), unexplained.size());
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::Index i = unexplained[k].second;
      Eigen::VectorXd r = Eigen::VectorXd(Y.col(i)) - D * C.col(i);
      const double rn = r.norm();
      if (!(rn > 0.0)) continue;
      D.col(dead[k]) = r / rn;
    }
    if (n > 0) refresh_products();
  }

  void remove_atoms(const std::vector<Eigen::Index>& drop) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index a = 0; a < D.cols(); ++a) {
      if (std::find(drop.begin(), drop.end(), a) == drop.end()) keep.push_back(a);
    }
    Eigen::MatrixXd D2(D.rows(), static_cast<Eigen::Index>(keep.size()));
    Eigen::MatrixXd C2(static_cast<Eigen::Index>(keep.size()), C.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) {
      D2.col(static_cast<Eigen::Index>(k)) = D.col(keep[k]);
      C2.row(static_cast<Eigen::Index>(k)) = C.row(keep[k]);
    }
    D = std::move(D2);
    C = std::move(C2);
    refresh_products();
  }
};

/// Atoms flagged for pruning this round: every unused atom plus the weaker
/// half of the used-but-rare ones. Always leaves at least one atom.
std::vector<Eigen::Index> pruning_candidates(const Learner& lr, double threshold) {
  const Eigen::VectorXi use = lr.usage();
  const Eigen::VectorXd mass = lr.C.rowwise().sum();
  std::vector<Eigen::Index> zero, rare;
  for (Eigen::Index a = 0; a < use.size(); ++a) {
    if (use(a) >= threshold) continue;
    (use(a) == 0 ? zero : rare).push_back(a);
  }
  if (zero.empty() && rare.empty()) return {};
  // weakest first: fewest users, then least coefficient mass, then later index
  std::sort(rare.begin(), rare.end(), [&](Eigen::Index x, Eigen::Index y) {
    if (use(x) != use(y)) return use(x) < use(y);
    if (mass(x) != mass(y)) return mass(x) < mass(y);
    return x > y;
  });
  std::vector<Eigen::Index> drop = zero;
  const std::size_t take = (rare.size() + 1) / 2;
  drop.insert(drop.end(), rare.begin(), rare.begin() + static_cast<std::ptrdiff_t>(take));

  if (drop.size() >= static_cast<std::size_t>(use.size())) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < use.size(); ++a) {
      if (use(a) > use(best) || (use(a) == use(best) && mass(a) > mass(best))) best = a;
    }
    drop.erase(std::remove(drop.begin(), drop.end(), best), drop.end());
  }
  return drop;
}

MotionPrimitive to_primitive(const Eigen::VectorXd& atom, double cell_floor, int id) {
  const Eigen::Index n = atom.size() / 2;
  double strongest = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) strongest = std::max(strongest, atom.segment<2>(2 * k).norm());
  std::vector<CellVelocity> cells;
  if (strongest > 0.0) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const Vec2 v = atom.segment<2>(2 * k);
      const double m = v.norm();
      if (m > 0.0 && m >= cell_floor * strongest) cells.push_back({static_cast<int>(k), v / m});
    }
  }
  return {id, CellField(static_cast<int>(n), std::move(cells))};
}

}  // namespace

const MotionPrimitive& Dictionary::atom(int id) const {
  if (id < 1 || id > size()) throw DataError("dictionary has no atom " + std::to_string(id));
  return atoms[static_cast<std::size_t>(id - 1)];
}

void Dictionary::validate() const {
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    const auto& a = atoms[k];
    if (a.id != static_cast<int>(k) + 1) throw DataError("dictionary atom ids must be 1..L in order");
    if (a.field.empty()) throw DataError("dictionary atom " + std::to_string(a.id) + " has empty support");
    if (a.field.num_cells() != num_cells()) throw DataError("dictionary atoms disagree on grid size");
    for (const auto& c : a.field.cells()) {
      if (!c.v.allFinite()) throw DataError("dictionary atom " + std::to_string(a.id) + " is not finite");
    }
  }
}

double objective(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& D, const Eigen::MatrixXd& C,
                 double lambda) {
  if (D.rows() != Y.rows() || D.cols() != C.rows() || C.cols() != Y.cols()) {
    throw DataError("objective: shape mismatch");
  }
  return (Y - D * C).squaredNorm() + lambda * C.cwiseAbs().sum();
}

DictionaryResult learn_dictionary(std::span<const GridVector> vectors, const SparseCodingConfig& cfg) {
  if (vectors.empty()) throw DataError("learn_dictionary: no input vectors");
  if (cfg.max_atoms < 1) throw DataError("learn_dictionary: max_atoms must be >= 1");
  if (!(cfg.tol > 0.0)) throw DataError("learn_dictionary: tol must be positive");
  const int n_cells = vectors.front().num_cells();
  const auto p = static_cast<Eigen::Index>(vectors.size());

  std::vector<Eigen::Triplet<double>> triplets;
  double y_sq = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto& v = vectors[static_cast<std::size_t>(i)];
    if (v.num_cells() != n_cells) throw DataError("learn_dictionary: inconsistent grid dimension");
    for (const auto& c : v.cells()) {
      triplets.emplace_back(2 * c.cell, i, c.v.x());
      triplets.emplace_back(2 * c.cell + 1, i, c.v.y());
    }
    y_sq += v.squared_norm();
  }
  if (!(y_sq > 0.0)) throw DataError("learn_dictionary: all input vectors are zero");
  SpMat Y(2 * static_cast<Eigen::Index>(n_cells), p);
  Y.setFromTriplets(triplets.begin(), triplets.end());
  Y.makeCompressed();

  const double lambda = cfg.lambda.value_or(cfg.lambda_scale * y_sq / static_cast<double>(p));
  if (!(lambda >= 0.0)) throw DataError("learn_dictionary: lambda must be nonnegative");

  // Seed atoms from randomly chosen nonzero training vectors.
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (Y.col(i).squaredNorm() > 0.0) order.push_back(i);
  }
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto L0 = static_cast<Eigen::Index>(std::min<std::size_t>(static_cast<std::size_t>(cfg.max_atoms), order.size()));

  Learner lr{Y, lambda, y_sq, Eigen::MatrixXd(Y.rows(), L0), Eigen::MatrixXd::Zero(L0, p), {}, {}};
  for (Eigen::Index a = 0; a < L0; ++a) {
    Eigen::VectorXd col = Y.col(order[static_cast<std::size_t>(a)]);
    lr.D.col(a) = col / col.norm();
  }
  lr.refresh_products();

  DictionaryResult result;
  result.lambda = lambda;
  for (int round = 0; round < kMaxRounds; ++round) {
    result.round_starts.push_back(result.objective_trace.size());
    double prev = lr.current_objective();
    result.objective_trace.push_back(prev);
    for (int it = 0; it < cfg.max_iters; ++it) {
      lr.code_all();
      lr.update_atoms();
      lr.refresh_products();
      lr.reseed_unused();
      const double obj = lr.current_objective();
      result.objective_trace.push_back(obj);
      const bool converged = prev - obj <= cfg.tol * std::abs(prev);
      prev = obj;
      if (converged) break;
    }
    const auto drop = pruning_candidates(lr, cfg.prune_threshold);
    if (drop.empty()) break;
    logger().debug("dictionary round {}: pruning {} of {} atoms", round, drop.size(), lr.D.cols());
    lr.remove_atoms(drop);
  }

  Dictionary dict;
  for (Eigen::Index a = 0; a < lr.D.cols(); ++a) {
    auto prim = to_primitive(lr.D.col(a), cfg.cell_floor, dict.size() + 1);
    if (!prim.field.empty()) dict.atoms.push_back(std::move(prim));
  }
  if (dict.empty()) throw DataError("learn_dictionary: no atom survived");

  result.coefficients.resize(dict.size(), p);
  for (Eigen::Index i = 0; i < p; ++i) {
    result.coefficients.col(i) = sparse_code(vectors[static_cast<std::size_t>(i)], dict, lambda);
  }
  result.dictionary = std::move(dict);
  return result;
}

Eigen::VectorXd sparse_code(const GridVector& y, const Dictionary& dict, double lambda) {
  if (dict.empty()) throw DataError("sparse_code: empty dictionary");
  if (y.num_cells() != dict.num_cells()) throw DataError("sparse_code: grid dimension mismatch");
  const int L = dict.size();
  Eigen::VectorXd code = Eigen::VectorXd::Zero(L);
  if (y.empty()) return code;

  std::vector<int> active;
  for (int a = 0; a < L; ++a) {
    if (inner_product(dict.atoms[static_cast<std::size_t>(a)].field, y) != 0.0) active.push_back(a);
  }

  Eigen::VectorXd residual(2 * static_cast<Eigen::Index>(y.num_cells()));
  for (int guard = 0; guard <= L; ++guard) {
    const auto S = static_cast<Eigen::Index>(active.size());
    if (S > 0) {
      Eigen::MatrixXd G(S, S);
      Eigen::VectorXd b(S), c(S);
      for (Eigen::Index i = 0; i < S; ++i) {
        const auto& fi = dict.atoms[static_cast<std::size_t>(active[i])].field;
        b(i) = inner_product(fi, y);
        c(i) = code(active[i]);
        for (Eigen::Index j = 0; j <= i; ++j) {
          G(i, j) = G(j, i) = inner_product(fi, dict.atoms[static_cast<std::size_t>(active[j])].field);
        }
      }
      coordinate_descent(G, b, lambda, c);
      for (Eigen::Index i = 0; i < S; ++i) code(active[i]) = c(i);
    }

    // Optimality check for atoms outside the active set.
    residual.setZero();
    for (const auto& cv : y.cells()) residual.segment<2>(2 * cv.cell) += cv.v;
    for (int a : active) {
      if (code(a) == 0.0) continue;
      for (const auto& cv : dict.atoms[static_cast<std::size_t>(a)].field.cells()) {
        residual.segment<2>(2 * cv.cell) -= code(a) * cv.v;
      }
    }
    std::vector<int> violators;
    for (int a = 0; a < L; ++a) {
      if (std::find(active.begin(), active.end(), a) != active.end()) continue;
      double corr = 0.0;
      for (const auto& cv : dict.atoms[static_cast<std::size_t>(a)].field.cells()) {
        corr += residual.segment<2>(2 * cv.cell).dot(cv.v);
      }
      if (2.0 * corr - lambda > 1e-12 * (1.0 + lambda)) violators.push_back(a);
    }
    if (violators.empty()) break;
    active.insert(active.end(), violators.begin(), violators.end());
    std::sort(active.begin(), active.end());
  }
  return code;
}

}  // namespace sila
