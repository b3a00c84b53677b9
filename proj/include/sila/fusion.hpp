#pragma once

#include "sila/model.hpp"

#include <span>
#include <vector>

namespace sila {

/// Per node k of the accumulated model: the node incoming edges are routed
/// to (in[k]) and the node outgoing edges leave from (out[k]). Index 0 is
/// unused so that in[k] refers to primitive id k.
struct IndexMap {
  std::vector<int> in;
  std::vector<int> out;

  static IndexMap identity(int num_nodes);
  int size() const { return static_cast<int>(in.size()) - 1; }
  bool operator==(const IndexMap&) const = default;
};

struct Accumulated {
  /// Previous primitives keep ids 1..num_prev; new ones follow.
  Model model;
  IndexMap index;
  int num_prev = 0;
};

/// Concatenates two models on the same grid, re-tagging the second model's
/// primitives and edges. The result keeps prev's episode counter.
Accumulated accumulate(const Model& prev, const Model& next);

/// Cosine of the angle between two primitives in R^(2N).
double similarity(const MotionPrimitive& a, const MotionPrimitive& b);

struct SimilarityEdge {
  int i = 0;  // primitive of the previous model
  int j = 0;  // primitive of the new model
  double weight = 0.0;
  bool operator==(const SimilarityEdge&) const = default;
};

/// Cross-model pairs with similarity >= t_s, sorted by (i, j).
struct SimilarityGraph {
  std::vector<SimilarityEdge> edges;
};

SimilarityGraph build_similarity_graph(std::span<const MotionPrimitive> prev,
                                       std::span<const MotionPrimitive> next, double t_s);

/// Groups of primitive ids (ascending within a group) to be averaged.
using FuseSet = std::vector<std::vector<int>>;

struct Resolution {
  IndexMap index;
  FuseSet fuse;
  /// Primitives replaced by a matched transition of the other model.
  std::vector<int> dropped;
  /// Matched nodes left without any edge after relaxation.
  std::vector<int> orphans;
};

/// Re-indexes each connected component of the similarity graph by its
/// topology: one edge fuses the pair; two edges around a centre k fuse the
/// triple when the outer nodes are similar, replace k when the outer nodes
/// are linked by a transition, and otherwise leave the component alone.
/// Larger components shed their weakest edges (ties: lexicographic) until
/// two remain. Components are visited by ascending minimum node id.
Resolution resolve_components(const SimilarityGraph& gs, const Model& accumulated, IndexMap idx, double t_s);

struct FusedDictionary {
  Dictionary dict;
  /// Accumulated id -> id in dict; 0 for primitives that were dropped.
  std::vector<int> new_id;
};

/// Replaces every fuse group by the cell-wise mean of its members (absent
/// cells count as zero), removes dropped primitives and compacts the ids
/// in order of the surviving accumulated ids.
FusedDictionary fuse_primitives(const FuseSet& fuse, const Dictionary& accumulated,
                                const std::vector<int>& dropped = {});

/// Maps every edge (i, j) to (out[i], in[j]) and then to fused ids (a
/// dropped node's self edge becomes (in[k], out[k])). Edges landing on the
/// same pair are merged: counts add up and the field of the oldest edge is
/// updated with the other edges' data.
std::vector<Transition> reindex_and_fuse_edges(const std::vector<Transition>& edges, const IndexMap& idx,
                                               const FusedDictionary& fused,
                                               const std::vector<int>& dropped, const GpConfig& gp);

/// Details of one incremental_learning call, for inspection and tests.
struct FusionTrace {
  int accumulated_size = 0;
  SimilarityGraph graph;
  Resolution resolution;
};

/// One SILA step: accumulate, match, resolve, fuse. Increments the episode.
Model incremental_learning(const Model& prev, const Model& next, double t_s, const GpConfig& gp,
                           FusionTrace* trace = nullptr);

/// Baseline: concatenation without fusion. Increments the episode.
Model standard_accumulate(const Model& prev, const Model& next);

}  // namespace sila
