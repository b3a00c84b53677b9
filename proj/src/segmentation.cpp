#include "sila/segmentation.hpp"

#include "sila/error.hpp"
#include "sila/log.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>

namespace sila {

namespace {

struct Visit {
  int cell = 0;
  int atom = 0;  // 1-based, 0 = unexplained
  std::vector<std::size_t> samples;
};

struct Run {
  int atom = 0;
  std::vector<std::size_t> visits;
};

std::vector<Run> build_runs(const std::vector<Visit>& visits) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < visits.size(); ++i) {
    if (runs.empty() || runs.back().atom != visits[i].atom) runs.push_back({visits[i].atom, {}});
    runs.back().visits.push_back(i);
  }
  return runs;
}

void merge_equal_neighbours(std::vector<Run>& runs) {
  std::vector<Run> out;
  for (auto& r : runs) {
    if (!out.empty() && out.back().atom == r.atom) {
      out.back().visits.insert(out.back().visits.end(), r.visits.begin(), r.visits.end());
    } else {
      out.push_back(std::move(r));
    }
  }
  runs = std::move(out);
}

void absorb_short_runs(std::vector<Run>& runs, int min_run) {
  while (runs.size() > 1) {
    // shortest run first, leftmost on ties
    std::size_t victim = runs.size();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (static_cast<int>(runs[i].visits.size()) >= min_run) continue;
      if (victim == runs.size() || runs[i].visits.size() < runs[victim].visits.size()) victim = i;
    }
    if (victim == runs.size()) return;
    std::size_t into;
    if (victim == 0) {
      into = 1;
    } else if (victim + 1 == runs.size()) {
      into = victim - 1;
    } else {
      into = runs[victim + 1].visits.size() > runs[victim - 1].visits.size() ? victim + 1 : victim - 1;
    }
    auto& target = runs[into].visits;
    auto& moved = runs[victim].visits;
    if (into < victim) {
      target.insert(target.end(), moved.begin(), moved.end());
    } else {
      target.insert(target.begin(), moved.begin(), moved.end());
    }
    runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(victim));
    merge_equal_neighbours(runs);
  }
}

}  // namespace

std::optional<std::vector<Segment>> segment_trajectory(const NormalizedTrajectory& traj,
                                                       const GridSpec& grid, const Dictionary& dict,
                                                       const Eigen::VectorXd& code, int min_run) {
  if (code.size() != dict.size()) throw DataError("segment_trajectory: code length != dictionary size");
  validate_samples(traj.samples, traj.id);
  const auto kin = finite_differences(traj.samples);

  std::vector<Visit> visits;
  for (std::size_t i = 0; i < kin.size(); ++i) {
    const auto k = cell_index(kin[i].p, grid);
    if (!k) continue;
    if (visits.empty() || visits.back().cell != *k) visits.push_back({*k, 0, {}});
    visits.back().samples.push_back(i);
  }

  bool any = false;
  for (auto& v : visits) {
    double best = 0.0;
    for (int a = 1; a <= dict.size(); ++a) {
      const double c = code(a - 1);
      if (!(c > 0.0)) continue;
      const Vec2* m = dict.atom(a).field.find(v.cell);
      if (m == nullptr) continue;
      const double score = c * m->norm();
      if (score > best) {
        best = score;
        v.atom = a;
      }
    }
    any = any || v.atom != 0;
  }
  if (!any) {
    logger().warn("trajectory '{}' is not explained by any atom; skipped", traj.id);
    return std::nullopt;
  }

  // Unexplained cells join the preceding run (or the following one at the start).
  int carry = 0;
  for (auto& v : visits) {
    if (v.atom != 0) carry = v.atom;
    else v.atom = carry;
  }
  for (auto it = visits.rbegin(); it != visits.rend(); ++it) {
    if (it->atom != 0) carry = it->atom;
    else it->atom = carry;
  }

  auto runs = build_runs(visits);
  absorb_short_runs(runs, std::max(1, min_run));

  std::vector<Segment> segments;
  for (const auto& r : runs) {
    Segment s{traj.id, r.atom, {}, {}};
    for (std::size_t vi : r.visits) {
      s.cell_run.push_back(visits[vi].cell);
      for (std::size_t si : visits[vi].samples) s.samples.push_back(kin[si]);
    }
    segments.push_back(std::move(s));
  }
  return segments;
}

std::size_t TransitionMatrix::offset(int from, int to) const {
  if (from < 1 || from > n_ || to < 1 || to > n_) throw DataError("transition index out of range");
  return static_cast<std::size_t>(from - 1) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(to - 1);
}

long TransitionMatrix::total() const {
  long s = 0;
  for (int c : counts_) s += c;
  return s;
}

TransitionMatrix build_transition_matrix(const std::vector<std::vector<Segment>>& per_trajectory,
                                         int num_atoms) {
  TransitionMatrix T(num_atoms);
  for (const auto& segs : per_trajectory) {
    if (segs.size() == 1) {
      ++T(segs.front().atom_id, segs.front().atom_id);
      continue;
    }
    for (std::size_t k = 0; k + 1 < segs.size(); ++k) ++T(segs[k].atom_id, segs[k + 1].atom_id);
  }
  return T;
}

const GraphEdge* MotionPrimitiveGraph::find(int from, int to) const {
  auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{from, to},
                             [](const GraphEdge& e, const std::pair<int, int>& key) {
                               return std::pair{e.from, e.to} < key;
                             });
  if (it == edges.end() || it->from != from || it->to != to) return nullptr;
  return &*it;
}

MotionPrimitiveGraph build_graph(const TransitionMatrix& T,
                                 const std::vector<std::vector<Segment>>& per_trajectory) {
  MotionPrimitiveGraph g;
  g.num_nodes = T.size();
  std::map<std::pair<int, int>, std::vector<FlowSample>> data;
  auto append = [](std::vector<FlowSample>& dst, const Segment& s) {
    for (const auto& k : s.samples) dst.push_back({k.p, k.v});
  };
  for (const auto& segs : per_trajectory) {
    if (segs.size() == 1) {
      append(data[{segs[0].atom_id, segs[0].atom_id}], segs[0]);
      continue;
    }
    for (std::size_t k = 0; k + 1 < segs.size(); ++k) {
      auto& dst = data[{segs[k].atom_id, segs[k + 1].atom_id}];
      append(dst, segs[k]);
      append(dst, segs[k + 1]);
    }
  }
  for (int i = 1; i <= T.size(); ++i) {
    for (int j = 1; j <= T.size(); ++j) {
      if (T(i, j) <= 0) continue;
      auto it = data.find({i, j});
      g.edges.push_back({i, j, T(i, j), it == data.end() ? std::vector<FlowSample>{} : std::move(it->second)});
    }
  }
  return g;
}

}  // namespace sila
