#include "sila/fusion.hpp"

#include "sila/error.hpp"
#include "sila/log.hpp"
#include "sila/parallel.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace sila {

namespace {

bool is_blank(const Model& m) { return m.dict.empty() && m.transitions.empty(); }

void check_same_grid(const Model& a, const Model& b) {
  if (!(a.grid == b.grid)) throw DataError("models were learned on different grids");
}

// Connected components of an edge list, each as its edges, ordered by the
// smallest node id they contain.
std::vector<std::vector<SimilarityEdge>> components(const std::vector<SimilarityEdge>& edges) {
  std::map<int, int> parent;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : edges) {
    parent.try_emplace(e.i, e.i);
    parent.try_emplace(e.j, e.j);
  }
  for (const auto& e : edges) {
    const int a = find(e.i), b = find(e.j);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  // Roots are the minimum node of each component.
  std::map<int, std::vector<SimilarityEdge>> grouped;
  for (const auto& e : edges) grouped[find(e.i)].push_back(e);
  std::vector<std::vector<SimilarityEdge>> out;
  for (auto& [root, es] : grouped) {
    std::sort(es.begin(), es.end(), [](const auto& x, const auto& y) { return std::pair{x.i, x.j} < std::pair{y.i, y.j}; });
    out.push_back(std::move(es));
  }
  return out;
}

bool has_edge(const Model& m, int from, int to) { return m.find(from, to) != nullptr; }

void collapse(IndexMap& idx, std::vector<int> nodes, FuseSet& fuse) {
  int target = idx.in[static_cast<std::size_t>(nodes.front())];
  for (int k : nodes) target = std::min(target, idx.in[static_cast<std::size_t>(k)]);
  for (int k : nodes) {
    idx.in[static_cast<std::size_t>(k)] = target;
    idx.out[static_cast<std::size_t>(k)] = target;
  }
  std::sort(nodes.begin(), nodes.end());
  fuse.push_back(std::move(nodes));
}

void resolve_one(const std::vector<SimilarityEdge>& cc, const Model& acc, double t_s, Resolution& res) {
  if (cc.empty()) throw InternalError("empty similarity component");
  if (cc.size() == 1) {
    collapse(res.index, {cc[0].i, cc[0].j}, res.fuse);
    return;
  }
  if (cc.size() == 2) {
    // Bipartite and connected: a path i - k - j around a centre k.
    const auto& e0 = cc[0];
    const auto& e1 = cc[1];
    int k = 0;
    if (e0.i == e1.i) k = e0.i;
    else if (e0.j == e1.j) k = e0.j;
    else throw InternalError("two-edge similarity component is not a path");
    int i = e0.i == k ? e0.j : e0.i;
    int j = e1.i == k ? e1.j : e1.i;
    if (i > j) std::swap(i, j);
    int first = 0, second = 0;
    if (has_edge(acc, i, j)) {
      first = i;
      second = j;
    } else if (has_edge(acc, j, i)) {
      first = j;
      second = i;
    }
    if (first != 0) {
      res.index.in[static_cast<std::size_t>(k)] = res.index.in[static_cast<std::size_t>(first)];
      res.index.out[static_cast<std::size_t>(k)] = res.index.out[static_cast<std::size_t>(second)];
      res.dropped.push_back(k);
      logger().debug("primitive {} replaced by transition ({}, {})", k, first, second);
    } else if (similarity(acc.dict.atom(i), acc.dict.atom(j)) >= t_s) {
      collapse(res.index, {i, j, k}, res.fuse);
    } else {
      logger().debug("component around primitive {} left unchanged", k);
    }
    return;
  }
  // Relax the weakest edges until two remain.
  std::vector<SimilarityEdge> kept = cc;
  std::sort(kept.begin(), kept.end(), [](const auto& x, const auto& y) {
    if (x.weight != y.weight) return x.weight < y.weight;
    return std::pair{x.i, x.j} < std::pair{y.i, y.j};
  });
  kept.erase(kept.begin(), kept.end() - 2);
  std::set<int> before, after;
  for (const auto& e : cc) before.insert({e.i, e.j});
  for (const auto& e : kept) after.insert({e.i, e.j});
  for (int node : before) {
    if (!after.contains(node)) {
      res.orphans.push_back(node);
      logger().info("primitive {} lost all matches during relaxation", node);
    }
  }
  for (const auto& sub : components(kept)) resolve_one(sub, acc, t_s, res);
}

}  // namespace

IndexMap IndexMap::identity(int num_nodes) {
  IndexMap m;
  m.in.resize(static_cast<std::size_t>(num_nodes) + 1);
  std::iota(m.in.begin(), m.in.end(), 0);
  m.out = m.in;
  return m;
}

Accumulated accumulate(const Model& prev, const Model& next) {
  if (!is_blank(prev) && !is_blank(next)) check_same_grid(prev, next);
  Accumulated acc;
  acc.model.grid = is_blank(prev) ? next.grid : prev.grid;
  acc.model.episode = prev.episode;
  acc.num_prev = prev.dict.size();
  const int shift = acc.num_prev;
  acc.model.dict.atoms = prev.dict.atoms;
  for (const auto& a : next.dict.atoms) acc.model.dict.atoms.push_back({a.id + shift, a.field});
  acc.model.transitions = prev.transitions;
  for (const auto& t : next.transitions) {
    Transition moved = t;
    moved.from += shift;
    moved.to += shift;
    acc.model.transitions.push_back(std::move(moved));
  }
  acc.index = IndexMap::identity(acc.model.dict.size());
  return acc;
}

double similarity(const MotionPrimitive& a, const MotionPrimitive& b) {
  const double na = a.field.norm();
  const double nb = b.field.norm();
  if (na == 0.0 || nb == 0.0) throw DataError("similarity of a zero primitive");
  return inner_product(a.field, b.field) / (na * nb);
}

SimilarityGraph build_similarity_graph(std::span<const MotionPrimitive> prev,
                                       std::span<const MotionPrimitive> next, double t_s) {
  if (!(t_s > 0.0 && t_s <= 1.0)) throw DataError("similarity threshold must lie in (0, 1]");
  SimilarityGraph g;
  for (const auto& a : prev) {
    for (const auto& b : next) {
      const double s = similarity(a, b);
      if (s >= t_s) g.edges.push_back({a.id, b.id, s});
    }
  }
  std::sort(g.edges.begin(), g.edges.end(),
            [](const auto& x, const auto& y) { return std::pair{x.i, x.j} < std::pair{y.i, y.j}; });
  return g;
}

Resolution resolve_components(const SimilarityGraph& gs, const Model& accumulated, IndexMap idx, double t_s) {
  for (const auto& e : gs.edges) {
    if (e.i < 1 || e.j < 1 || e.i > idx.size() || e.j > idx.size()) {
      throw InternalError("similarity edge references a node outside the index map");
    }
  }
  Resolution res;
  res.index = std::move(idx);
  for (const auto& cc : components(gs.edges)) resolve_one(cc, accumulated, t_s, res);
  return res;
}

FusedDictionary fuse_primitives(const FuseSet& fuse, const Dictionary& accumulated, const std::vector<int>& dropped) {
  const int n = accumulated.size();
  std::vector<int> rep(static_cast<std::size_t>(n) + 1);
  std::iota(rep.begin(), rep.end(), 0);
  std::vector<bool> seen(static_cast<std::size_t>(n) + 1, false);
  for (const auto& group : fuse) {
    if (group.empty()) throw InternalError("empty fuse group");
    const int r = *std::min_element(group.begin(), group.end());
    for (int k : group) {
      if (k < 1 || k > n) throw InternalError("fuse group references a missing primitive");
      if (seen[static_cast<std::size_t>(k)]) throw InternalError("fuse groups overlap");
      seen[static_cast<std::size_t>(k)] = true;
      rep[static_cast<std::size_t>(k)] = r;
    }
  }
  std::vector<bool> removed(static_cast<std::size_t>(n) + 1, false);
  for (int k : dropped) {
    if (seen[static_cast<std::size_t>(k)]) throw InternalError("a dropped primitive is also fused");
    removed[static_cast<std::size_t>(k)] = true;
  }

  FusedDictionary out;
  out.new_id.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int k = 1; k <= n; ++k) {
    if (removed[static_cast<std::size_t>(k)] || rep[static_cast<std::size_t>(k)] != k) continue;
    const int id = out.dict.size() + 1;
    out.new_id[static_cast<std::size_t>(k)] = id;
    out.dict.atoms.push_back({id, accumulated.atom(k).field});
  }
  for (const auto& group : fuse) {
    const int r = *std::min_element(group.begin(), group.end());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(accumulated.num_cells()));
    for (int k : group) sum += accumulated.atom(k).field.to_dense();
    const int id = out.new_id[static_cast<std::size_t>(r)];
    out.dict.atoms[static_cast<std::size_t>(id - 1)].field =
        CellField::from_dense(sum / static_cast<double>(group.size()));
    for (int k : group) out.new_id[static_cast<std::size_t>(k)] = id;
  }
  return out;
}

std::vector<Transition> reindex_and_fuse_edges(const std::vector<Transition>& edges, const IndexMap& idx,
                                               const FusedDictionary& fused, const std::vector<int>& dropped,
                                               const GpConfig& gp) {
  const std::set<int> dropped_set(dropped.begin(), dropped.end());
  auto lookup = [&](int accumulated_id) {
    if (accumulated_id < 1 || accumulated_id >= static_cast<int>(fused.new_id.size())) {
      throw InternalError("mapped edge endpoint outside the accumulated model");
    }
    const int id = fused.new_id[static_cast<std::size_t>(accumulated_id)];
    if (id == 0) throw InternalError(fmt::format("mapped edge endpoint {} is not in the fused dictionary", accumulated_id));
    return id;
  };
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& t = edges[e];
    int from = idx.out[static_cast<std::size_t>(t.from)];
    int to = idx.in[static_cast<std::size_t>(t.to)];
    if (t.from == t.to && dropped_set.contains(t.from)) {
      from = idx.in[static_cast<std::size_t>(t.from)];
      to = idx.out[static_cast<std::size_t>(t.to)];
    }
    groups[{lookup(from), lookup(to)}].push_back(e);
  }

  std::vector<std::pair<std::pair<int, int>, std::vector<std::size_t>>> work(groups.begin(), groups.end());
  std::vector<Transition> out(work.size());
  parallel_for(work.size(), [&](std::size_t g) {
    const auto& [key, members] = work[g];
    const Transition& base = edges[members.front()];
    Transition merged;
    merged.from = key.first;
    merged.to = key.second;
    merged.count = base.count;
    merged.data = base.data;
    std::vector<FlowSample> extra;
    for (std::size_t m = 1; m < members.size(); ++m) {
      const Transition& other = edges[members[m]];
      merged.count += other.count;
      const auto more = other.data.empty() ? surrogate_samples(other.flow) : other.data;
      extra.insert(extra.end(), more.begin(), more.end());
    }
    merged.flow = extra.empty() ? base.flow : incremental_update(base.flow, extra, gp);
    merged.data.insert(merged.data.end(), extra.begin(), extra.end());
    out[g] = std::move(merged);
  });
  return out;
}

Model incremental_learning(const Model& prev, const Model& next, double t_s, const GpConfig& gp, FusionTrace* trace) {
  if (!(t_s > 0.0 && t_s <= 1.0)) throw DataError("similarity threshold must lie in (0, 1]");
  Accumulated acc = accumulate(prev, next);
  const auto split = acc.model.dict.atoms.begin() + acc.num_prev;
  SimilarityGraph gs = build_similarity_graph(std::span(acc.model.dict.atoms.begin(), split),
                                              std::span(split, acc.model.dict.atoms.end()), t_s);
  Resolution res = resolve_components(gs, acc.model, acc.index, t_s);
  FusedDictionary fused = fuse_primitives(res.fuse, acc.model.dict, res.dropped);

  Model out;
  out.grid = acc.model.grid;
  out.episode = prev.episode + 1;
  out.transitions = reindex_and_fuse_edges(acc.model.transitions, res.index, fused, res.dropped, gp);
  out.dict = std::move(fused.dict);
  logger().debug("incremental step: {} accumulated -> {} primitives, fuse set {}", acc.model.dict.size(),
                 out.dict.size(), res.fuse);
  if (trace != nullptr) {
    trace->accumulated_size = acc.model.dict.size();
    trace->graph = std::move(gs);
    trace->resolution = std::move(res);
  }
  return out;
}

Model standard_accumulate(const Model& prev, const Model& next) {
  Accumulated acc = accumulate(prev, next);
  acc.model.episode = prev.episode + 1;
  return std::move(acc.model);
}

}  // namespace sila
