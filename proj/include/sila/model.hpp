#pragma once

#include "sila/dictionary.hpp"
#include "sila/gp_flow.hpp"
#include "sila/grid.hpp"
#include "sila/segmentation.hpp"

#include <span>
#include <vector>

namespace sila {

/// Edge of the motion-primitive graph with its flow field. `data` holds the
/// raw samples the field was trained on; it is kept in memory so the edge
/// can later be merged into another, and is not persisted.
struct Transition {
  int from = 0;
  int to = 0;
  int count = 0;
  FlowField flow;
  std::vector<FlowSample> data;
};

/// Dictionary of motion primitives plus transitions sorted by (from, to).
struct Model {
  GridSpec grid;
  Dictionary dict;
  std::vector<Transition> transitions;
  int episode = 0;

  bool empty() const { return dict.empty(); }
  const Transition* find(int from, int to) const;
  /// Sum of the counts on edges leaving `from`.
  long out_count(int from) const;
  /// Edge endpoints exist, edges are unique and sorted, counts positive,
  /// fields trained.
  void validate() const;
};

struct LearnConfig {
  /// Resampling step before vectorization and segmentation (s).
  double dt = 0.4;
  SparseCodingConfig coding;
  int min_run = 2;
  GpConfig gp;
};

/// Learns a model from one batch of common-frame trajectories: dictionary
/// by sparse coding of the grid vectors, segmentation, transition counts
/// and one flow field per transition. Returns an empty model (episode 1)
/// when no trajectory touches the grid.
Model train_model(std::span<const NormalizedTrajectory> trajs, const GridSpec& grid, const LearnConfig& cfg);

}  // namespace sila
