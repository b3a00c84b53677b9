#pragma once

#include "sila/fusion.hpp"
#include "sila/gp_flow.hpp"
#include "sila/model.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

namespace sila::testing {

inline const GridSpec kFixtureGrid{1, 8, Vec2(0, 0), 1.0};

/// Primitive with a single unit vector at `angle_deg` in `cell`.
inline MotionPrimitive heading(int id, int cell, double angle_deg) {
  const double r = angle_deg * std::numbers::pi / 180.0;
  return {id, CellField(kFixtureGrid.size(), {{cell, Vec2(std::cos(r), std::sin(r))}})};
}

/// Small trained flow field so merged edges can be updated.
inline FlowField tiny_flow(double speed) {
  const std::vector<FlowSample> d{{Vec2(0.2, 0.5), Vec2(speed, 0)},
                                  {Vec2(0.5, 0.5), Vec2(speed, 0.1)},
                                  {Vec2(0.8, 0.5), Vec2(speed, 0)}};
  GpConfig cfg;
  cfg.max_iters = 5;
  return train_flowfield(d, cfg);
}

inline Transition edge(int from, int to, int count) {
  const auto f = tiny_flow(0.1 * from + 0.01 * to);
  return {from, to, count, f, surrogate_samples(f)};
}

inline Model model_of(std::vector<MotionPrimitive> atoms, std::vector<Transition> edges, int episode = 1) {
  Model m;
  m.grid = kFixtureGrid;
  m.dict.atoms = std::move(atoms);
  m.transitions = std::move(edges);
  std::sort(m.transitions.begin(), m.transitions.end(),
            [](const Transition& a, const Transition& b) { return std::pair{a.from, a.to} < std::pair{b.from, b.to}; });
  m.episode = episode;
  return m;
}

/// Thirteen-node instance: previous primitives 1..6, new primitives 7..13
/// (1..7 in the new model). With t_s = 0.7 the similarity graph has three
/// components: a single edge (2,7); a two-edge component centred on 6 whose
/// outer nodes 12 and 13 are similar but unconnected; and a three-edge
/// component (3,9) 0.9, (4,9) 0.8, (4,10) 0.75 whose weakest edge is relaxed,
/// leaving a path 3-9-4 with dissimilar, unconnected ends.
struct ThirteenNodeCase {
  Model prev;
  Model next;
  double t_s = 0.7;
};

inline ThirteenNodeCase thirteen_node_case() {
  const double a9 = 0.0;
  const double a3 = std::acos(0.9) * 180.0 / std::numbers::pi;
  const double a4 = -std::acos(0.8) * 180.0 / std::numbers::pi;
  const double a10 = a4 - std::acos(0.75) * 180.0 / std::numbers::pi;
  ThirteenNodeCase c;
  c.prev = model_of({heading(1, 3, 90), heading(2, 0, 0), heading(3, 2, a3), heading(4, 2, a4), heading(5, 4, 45),
                     heading(6, 1, 0)},
                    {edge(1, 2, 2), edge(2, 3, 1), edge(5, 6, 3), edge(6, 6, 4)}, 3);
  // New-model ids: 7->1, 8->2, 9->3, 10->4, 11->5, 12->6, 13->7.
  c.next = model_of({heading(1, 0, 10), heading(2, 5, 30), heading(3, 2, a9), heading(4, 2, a10), heading(5, 6, -60),
                     heading(6, 1, 20), heading(7, 1, -20)},
                    {edge(1, 2, 1), edge(2, 3, 2), edge(3, 4, 1), edge(5, 6, 1), edge(6, 6, 2)});
  return c;
}

/// Builds an IndexMap from 1-based in/out columns.
inline IndexMap map_of(std::vector<int> in, std::vector<int> out) {
  in.insert(in.begin(), 0);
  out.insert(out.begin(), 0);
  return {in, out};
}

/// One hand-built component and the resolution it must produce at t_s 0.7.
struct FusionCase {
  std::string name;
  Model acc;
  SimilarityGraph graph;
  IndexMap index;
  FuseSet fuse;
  std::vector<int> dropped;
  std::vector<int> orphans;
};

inline std::vector<FusionCase> fusion_case_table() {
  std::vector<FusionCase> t;
  t.push_back({"one edge fuses the pair",
               model_of({heading(1, 0, 0), heading(2, 1, 0), heading(3, 0, 5)}, {}),
               {{{1, 3, 0.99}}},
               map_of({1, 2, 1}, {1, 2, 1}),
               {{1, 3}},
               {},
               {}});
  t.push_back({"two edges, outer nodes linked i to j: centre replaced by the transition",
               model_of({heading(1, 0, 0), heading(2, 1, 0), heading(3, 2, 0)}, {edge(1, 2, 1)}),
               {{{1, 3, 0.8}, {2, 3, 0.8}}},
               map_of({1, 2, 1}, {1, 2, 2}),
               {},
               {3},
               {}});
  t.push_back({"two edges, outer nodes linked j to i",
               model_of({heading(1, 0, 0), heading(2, 1, 0), heading(3, 2, 0)}, {edge(2, 1, 1)}),
               {{{1, 3, 0.8}, {2, 3, 0.8}}},
               map_of({1, 2, 2}, {1, 2, 1}),
               {},
               {3},
               {}});
  t.push_back({"two edges around a previous primitive",
               model_of({heading(1, 0, 0), heading(2, 1, 0), heading(3, 2, 0)}, {edge(2, 3, 1)}),
               {{{1, 2, 0.8}, {1, 3, 0.8}}},
               map_of({2, 2, 3}, {3, 2, 3}),
               {},
               {1},
               {}});
  t.push_back({"two edges, similar unlinked outer nodes: fuse the triple",
               model_of({heading(1, 0, 0), heading(2, 0, 20), heading(3, 0, -20)}, {edge(2, 2, 1)}),
               {{{1, 2, 0.94}, {1, 3, 0.94}}},
               map_of({1, 1, 1}, {1, 1, 1}),
               {{1, 2, 3}},
               {},
               {}});
  t.push_back({"two edges, dissimilar unlinked outer nodes: unchanged",
               model_of({heading(1, 0, 0), heading(2, 0, 50), heading(3, 0, -50)}, {}),
               {{{1, 2, 0.71}, {1, 3, 0.71}}},
               IndexMap::identity(3),
               {},
               {},
               {}});
  // Remaining path 1-3-2 with transition (1, 2): primitive 3 is replaced.
  t.push_back({"three edges: the weakest is relaxed first",
               model_of({heading(1, 0, 25.8), heading(2, 0, -36.9), heading(3, 0, 0), heading(4, 0, -78.3)},
                        {edge(1, 2, 1)}),
               {{{1, 3, 0.9}, {2, 3, 0.8}, {2, 4, 0.75}}},
               map_of({1, 2, 1, 4}, {1, 2, 2, 4}),
               {},
               {3},
               {4}});
  t.push_back({"relaxation can split a component",
               model_of({heading(1, 0, 0), heading(2, 1, 0), heading(3, 0, 5), heading(4, 2, 0), heading(5, 1, 5)}, {}),
               {{{1, 3, 0.95}, {1, 4, 0.71}, {2, 4, 0.72}, {2, 5, 0.96}}},
               map_of({1, 2, 1, 4, 2}, {1, 2, 1, 4, 2}),
               {{1, 3}, {2, 5}},
               {},
               {4}});
  // (1,3) goes first; 1-4 and 2-3 remain as separate single edges.
  t.push_back({"equal weights are relaxed in lexicographic order",
               model_of({heading(1, 0, 0), heading(2, 0, 80), heading(3, 0, 40), heading(4, 1, 0)}, {}),
               {{{1, 3, 0.8}, {2, 3, 0.8}, {1, 4, 0.8}}},
               map_of({1, 2, 2, 1}, {1, 2, 2, 1}),
               {{1, 4}, {2, 3}},
               {},
               {}});
  return t;
}

/// Expected outcome of incremental learning on thirteen_node_case().
struct ThirteenNodeExpectation {
  FuseSet fuse{{2, 7}, {6, 12, 13}};
  std::vector<int> orphans{10};
  IndexMap index = map_of({1, 2, 3, 4, 5, 6, 2, 8, 9, 10, 11, 6, 6}, {1, 2, 3, 4, 5, 6, 2, 8, 9, 10, 11, 6, 6});
  int final_size = 10;
  int episode = 4;
  // Accumulated 8->7, 9->8, 10->9, 11->10 after compaction.
  std::vector<std::tuple<int, int, int>> edges{{1, 2, 2}, {2, 3, 1}, {2, 7, 1}, {5, 6, 3},
                                               {6, 6, 6}, {7, 8, 2}, {8, 9, 1}, {10, 6, 1}};
};

}  // namespace sila::testing
