#pragma once

#include "sila/frames.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

namespace sila {

/// Row-major grid of square cells in common-frame units. Rows run along b,
/// columns along a.
struct GridSpec {
  int rows = 1;
  int cols = 1;
  Vec2 min_corner = Vec2::Zero();
  double cell_size = 1.0;

  int size() const { return rows * cols; }
  void validate() const;
  bool operator==(const GridSpec& other) const;

  Vec2 cell_center(int index) const;

  /// rows x cols grid covering the bounding box of every sample, grown by
  /// `margin` (fraction of the box extent) on each side.
  static GridSpec fit(std::span<const NormalizedTrajectory> trajs, int rows = 25, int cols = 29,
                      double margin = 0.05);
};

/// Row-major index of the cell containing p, or nullopt outside the grid.
std::optional<int> cell_index(const Vec2& p, const GridSpec& grid);

struct CellVelocity {
  int cell = 0;
  Vec2 v = Vec2::Zero();

  bool operator==(const CellVelocity& o) const { return cell == o.cell && v == o.v; }
};

/// Sparse field of 2D vectors over a grid with N cells, i.e. a vector in
/// R^(2N) that is zero off its support. Cells are kept sorted by index.
class CellField {
 public:
  CellField() = default;
  explicit CellField(int num_cells) : num_cells_(num_cells) {}
  /// Cells may arrive in any order; duplicates are rejected.
  CellField(int num_cells, std::vector<CellVelocity> cells);

  int num_cells() const { return num_cells_; }
  const std::vector<CellVelocity>& cells() const { return cells_; }
  bool empty() const { return cells_.empty(); }
  std::size_t support_size() const { return cells_.size(); }

  /// nullptr when the cell is not in the support.
  const Vec2* find(int cell) const;
  double squared_norm() const;
  double norm() const;

  Eigen::VectorXd to_dense() const;
  /// Drops cells whose vector norm is <= drop_below.
  static CellField from_dense(const Eigen::VectorXd& dense, double drop_below = 0.0);

  bool operator==(const CellField& other) const = default;

 private:
  int num_cells_ = 0;
  std::vector<CellVelocity> cells_;
};

/// A trajectory's grid representation: unit velocity direction per visited cell.
using GridVector = CellField;

struct MotionPrimitive {
  int id = 0;
  CellField field;
};

/// Per visited cell, the mean finite-difference velocity of the samples in
/// it, normalized to unit length. Cells with mean speed < 1e-6 are dropped
/// and out-of-grid samples ignored.
GridVector vectorize(const NormalizedTrajectory& traj, const GridSpec& grid);

/// Dot product in R^(2N). Throws DataError when the grids differ in size.
double inner_product(const CellField& a, const CellField& b);

}  // namespace sila
