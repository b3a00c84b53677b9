#pragma once

#include "sila/model.hpp"

#include <optional>
#include <vector>

namespace sila {

struct PredictConfig {
  double horizon = 5.0;
  double dt = 0.4;
  int max_depth = 3;
  int top_k = 5;
  /// Number of best-scoring start primitives expanded into hypotheses.
  int start_candidates = 2;
  /// l1 weight for coding the observation, relative to its squared norm.
  double lambda_scale = 0.1;
};

struct Candidate {
  int atom = 0;
  double score = 0.0;
};

struct Hypothesis {
  std::vector<Vec2> path;
  std::vector<int> primitives;
  double log_lik = 0.0;
  double weight = 0.0;
};

struct PredictionSet {
  std::vector<Hypothesis> hypotheses;
  bool empty() const { return hypotheses.empty(); }
};

/// Position/velocity samples of an observation after resampling at dt.
std::vector<FlowSample> observation_samples(const NormalizedTrajectory& obs, double dt);

/// Ranks primitives whose support overlaps the observed cells by
/// log(code coefficient) + best flow-field log-likelihood of the observed
/// samples over the primitive's outgoing edges (incoming ones if it has no
/// outgoing edge). Primitives without edges are not candidates. Sorted by
/// descending score, ties by id. Throws DataError when the observation
/// leaves the grid entirely or overlaps no usable primitive.
std::vector<Candidate> classify_observation(const NormalizedTrajectory& obs, const Model& model,
                                            const PredictConfig& cfg = {});

/// Simple paths from start following transitions, at most max_depth edges,
/// in depth-first order with successors visited by ascending id. [start]
/// comes first.
std::vector<std::vector<int>> enumerate_paths(const Model& model, int start, int max_depth);

/// Flow field that drives motion while in path[pos]: the edge to the next
/// primitive, or at the end of the path the self edge, the edge taken to
/// get there, or the busiest edge touching the primitive. nullptr if none.
const Transition* rollout_edge(const Model& model, const std::vector<int>& path, std::size_t pos);

/// Forward-Euler integration through the path's flow fields; floor(horizon
/// / dt) points after start. Moves on to the next primitive once it
/// explains the current cell more strongly than the current one. nullopt
/// if a needed flow field is missing or the state becomes non-finite.
std::optional<std::vector<Vec2>> rollout(const Model& model, const std::vector<int>& path, const Vec2& start,
                                         double dt, double horizon);

/// Multi-hypothesis prediction from the end of the observation. Each path
/// scores the observation log-likelihood under its first flow field plus
/// the log transition probabilities along it; the top_k hypotheses get
/// softmax weights. Empty (with a warning) if nothing can be rolled out.
PredictionSet predict(const NormalizedTrajectory& obs, const Model& model, const PredictConfig& cfg = {});

}  // namespace sila
