#include "sila/grid.hpp"

#include "sila/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace sila {

void GridSpec::validate() const {
  if (rows < 1 || cols < 1) throw DataError("grid must have at least one row and column");
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) throw DataError("grid cell_size must be positive");
  if (!min_corner.allFinite()) throw DataError("grid min_corner must be finite");
}

bool GridSpec::operator==(const GridSpec& o) const {
  return rows == o.rows && cols == o.cols && min_corner == o.min_corner && cell_size == o.cell_size;
}

Vec2 GridSpec::cell_center(int index) const {
  const int row = index / cols;
  const int col = index % cols;
  return min_corner + cell_size * Vec2(col + 0.5, row + 0.5);
}

GridSpec GridSpec::fit(std::span<const NormalizedTrajectory> trajs, int rows, int cols, double margin) {
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  for (const auto& tr : trajs) {
    for (const auto& s : tr.samples) {
      lo = lo.cwiseMin(s.p);
      hi = hi.cwiseMax(s.p);
    }
  }
  if (!lo.allFinite()) throw DataError("grid fit: no samples");
  Vec2 extent = (hi - lo).cwiseMax(1e-6);
  lo -= margin * extent;
  hi += margin * extent;
  extent = hi - lo;
  const double cell = std::max(extent.x() / cols, extent.y() / rows);
  const Vec2 center = 0.5 * (lo + hi);
  GridSpec g{rows, cols, center - 0.5 * cell * Vec2(cols, rows), cell};
  g.validate();
  return g;
}

std::optional<int> cell_index(const Vec2& p, const GridSpec& grid) {
  const Vec2 rel = (p - grid.min_corner) / grid.cell_size;
  if (!(rel.x() >= 0.0) || !(rel.y() >= 0.0)) return std::nullopt;
  const double col = std::floor(rel.x());
  const double row = std::floor(rel.y());
  if (col >= grid.cols || row >= grid.rows) return std::nullopt;
  return static_cast<int>(row) * grid.cols + static_cast<int>(col);
}

CellField::CellField(int num_cells, std::vector<CellVelocity> cells)
    : num_cells_(num_cells), cells_(std::move(cells)) {
  std::sort(cells_.begin(), cells_.end(),
            [](const CellVelocity& a, const CellVelocity& b) { return a.cell < b.cell; });
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (cells_[i].cell < 0 || cells_[i].cell >= num_cells_) {
      throw DataError("cell index out of range");
    }
    if (i > 0 && cells_[i].cell == cells_[i - 1].cell) throw DataError("duplicate cell in field");
  }
}

const Vec2* CellField::find(int cell) const {
  auto it = std::lower_bound(cells_.begin(), cells_.end(), cell,
                             [](const CellVelocity& c, int k) { return c.cell < k; });
  if (it == cells_.end() || it->cell != cell) return nullptr;
  return &it->v;
}

double CellField::squared_norm() const {
  double s = 0.0;
  for (const auto& c : cells_) s += c.v.squaredNorm();
  return s;
}

double CellField::norm() const { return std::sqrt(squared_norm()); }

Eigen::VectorXd CellField::to_dense() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(num_cells_));
  for (const auto& c : cells_) d.segment<2>(2 * c.cell) = c.v;
  return d;
}

CellField CellField::from_dense(const Eigen::VectorXd& dense, double drop_below) {
  if (dense.size() % 2 != 0) throw DataError("dense field must have even length");
  const int n = static_cast<int>(dense.size() / 2);
  CellField f(n);
  for (int k = 0; k < n; ++k) {
    const Vec2 v = dense.segment<2>(2 * k);
    if (v.norm() > drop_below && v.squaredNorm() > 0.0) f.cells_.push_back({k, v});
  }
  return f;
}

GridVector vectorize(const NormalizedTrajectory& traj, const GridSpec& grid) {
  grid.validate();
  validate_samples(traj.samples, traj.id);
  const auto kin = finite_differences(traj.samples);
  std::map<int, std::pair<Vec2, int>> acc;
  int in_bounds = 0;
  for (const auto& s : kin) {
    const auto k = cell_index(s.p, grid);
    if (!k) continue;
    ++in_bounds;
    auto& [sum, count] = acc.try_emplace(*k, Vec2::Zero(), 0).first->second;
    sum += s.v;
    ++count;
  }
  if (in_bounds == 0) throw DataError("trajectory '" + traj.id + "' lies entirely outside the grid");
  if (in_bounds < 2) throw DataError("trajectory '" + traj.id + "' has fewer than 2 in-grid samples");

  std::vector<CellVelocity> cells;
  for (const auto& [k, entry] : acc) {
    const Vec2 mean = entry.first / entry.second;
    const double speed = mean.norm();
    if (speed < 1e-6) continue;
    cells.push_back({k, mean / speed});
  }
  return GridVector(grid.size(), std::move(cells));
}

double inner_product(const CellField& a, const CellField& b) {
  if (a.num_cells() != b.num_cells()) throw DataError("inner_product: grid dimension mismatch");
  double s = 0.0;
  auto ia = a.cells().begin();
  auto ib = b.cells().begin();
  while (ia != a.cells().end() && ib != b.cells().end()) {
    if (ia->cell < ib->cell) {
      ++ia;
    } else if (ib->cell < ia->cell) {
      ++ib;
    } else {
      s += ia->v.dot(ib->v);
      ++ia;
      ++ib;
    }
  }
  return s;
}

}  // namespace sila
