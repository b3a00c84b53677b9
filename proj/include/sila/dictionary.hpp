#pragma once

#include "sila/grid.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sila {

/// Ordered motion primitives; atoms[k].id == k + 1.
struct Dictionary {
  std::vector<MotionPrimitive> atoms;

  int size() const { return static_cast<int>(atoms.size()); }
  bool empty() const { return atoms.empty(); }
  /// Grid cell count shared by the atoms (0 for an empty dictionary).
  int num_cells() const { return atoms.empty() ? 0 : atoms.front().field.num_cells(); }
  const MotionPrimitive& atom(int id) const;
  /// Ids are 1..L, no empty support, all vectors finite, same grid size.
  void validate() const;
};

struct SparseCodingConfig {
  int max_atoms = 40;
  /// l1 weight; when unset, lambda_scale * mean(||y||^2) over the input.
  std::optional<double> lambda;
  double lambda_scale = 0.1;
  int max_iters = 100;
  /// Relative objective decrease below which an alternating run stops.
  double tol = 1e-5;
  /// Atoms used by fewer trajectories than this are pruned.
  double prune_threshold = 3.0;
  /// Learned cells weaker than this fraction of the atom's strongest cell
  /// are dropped before the atom becomes a primitive.
  double cell_floor = 0.2;
  std::uint64_t seed = 0;
};

struct DictionaryResult {
  Dictionary dictionary;
  /// L x p nonnegative codes of the training vectors against `dictionary`.
  Eigen::MatrixXd coefficients;
  double lambda = 0.0;
  /// Objective at the start of each pruning round followed by its value
  /// after every alternating iteration of that round.
  std::vector<double> objective_trace;
  /// Positions in objective_trace where a pruning round starts.
  std::vector<std::size_t> round_starts;
};

/// Semi-non-negative sparse coding: minimizes ||Y - D C||_F^2 + lambda sum(C)
/// with C >= 0 and sign-free, norm-bounded atoms, alternating nonnegative
/// coordinate descent on C with exact per-atom updates of D. Low-usage atoms
/// are pruned in rounds. Deterministic for a given seed.
DictionaryResult learn_dictionary(std::span<const GridVector> vectors, const SparseCodingConfig& cfg);

/// argmin_{c >= 0} ||y - D c||^2 + lambda sum(c), by cyclic coordinate
/// descent over an active set grown until the optimality conditions hold.
Eigen::VectorXd sparse_code(const GridVector& y, const Dictionary& dict, double lambda);

/// ||Y - D C||_F^2 + lambda * sum|C|.
double objective(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& D, const Eigen::MatrixXd& C,
                 double lambda);

}  // namespace sila
