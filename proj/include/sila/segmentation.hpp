#pragma once

#include "sila/dictionary.hpp"
#include "sila/frames.hpp"
#include "sila/grid.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace sila {

/// Position/velocity pair used as GP training data.
struct FlowSample {
  Vec2 p = Vec2::Zero();
  Vec2 v = Vec2::Zero();
};

/// Contiguous stretch of a trajectory explained by one atom.
struct Segment {
  std::string traj_id;
  int atom_id = 0;
  std::vector<int> cell_run;
  std::vector<KinematicSample> samples;
};

/// Assigns each visited cell to the atom maximizing code[a] * |m_a(cell)|
/// (ties to the lower id), merges equal-atom runs and absorbs runs shorter
/// than min_run cells into their longer neighbour. Returns nullopt (and
/// logs a warning) when no atom explains any cell.
std::optional<std::vector<Segment>> segment_trajectory(const NormalizedTrajectory& traj,
                                                       const GridSpec& grid, const Dictionary& dict,
                                                       const Eigen::VectorXd& code, int min_run = 2);

/// L x L transition counts, indexed by 1-based atom ids.
class TransitionMatrix {
 public:
  explicit TransitionMatrix(int num_atoms = 0)
      : n_(num_atoms), counts_(static_cast<std::size_t>(num_atoms) * static_cast<std::size_t>(num_atoms), 0) {}

  int size() const { return n_; }
  int operator()(int from, int to) const { return counts_[offset(from, to)]; }
  int& operator()(int from, int to) { return counts_[offset(from, to)]; }
  long total() const;

 private:
  std::size_t offset(int from, int to) const;
  int n_;
  std::vector<int> counts_;
};

/// Counts each adjacent segment pair (i then j) once per occurrence; a
/// trajectory with a single segment in atom a counts one (a, a).
TransitionMatrix build_transition_matrix(const std::vector<std::vector<Segment>>& per_trajectory,
                                         int num_atoms);

struct GraphEdge {
  int from = 0;
  int to = 0;
  int count = 0;
  std::vector<FlowSample> data;
};

/// Nodes are atom ids 1..num_nodes; edges sorted by (from, to).
struct MotionPrimitiveGraph {
  int num_nodes = 0;
  std::vector<GraphEdge> edges;

  const GraphEdge* find(int from, int to) const;
};

/// One edge per nonzero T entry. Edge data: samples of both adjoining
/// segments for every occurrence (the single segment for self edges).
MotionPrimitiveGraph build_graph(const TransitionMatrix& T,
                                 const std::vector<std::vector<Segment>>& per_trajectory);

}  // namespace sila
