#include "sila/model.hpp"

#include "sila/error.hpp"
#include "sila/log.hpp"
#include "sila/parallel.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>

namespace sila {

const Transition* Model::find(int from, int to) const {
  auto it = std::lower_bound(transitions.begin(), transitions.end(), std::pair{from, to},
                             [](const Transition& t, const std::pair<int, int>& key) {
                               return std::pair{t.from, t.to} < key;
                             });
  if (it == transitions.end() || it->from != from || it->to != to) return nullptr;
  return &*it;
}

long Model::out_count(int from) const {
  long total = 0;
  for (const auto& t : transitions) {
    if (t.from == from) total += t.count;
  }
  return total;
}

void Model::validate() const {
  grid.validate();
  dict.validate();
  if (!dict.empty() && dict.num_cells() != grid.size()) throw DataError("dictionary does not match the grid");
  for (std::size_t k = 0; k < transitions.size(); ++k) {
    const auto& t = transitions[k];
    if (t.from < 1 || t.from > dict.size() || t.to < 1 || t.to > dict.size()) {
      throw DataError(fmt::format("transition ({}, {}) references a missing primitive", t.from, t.to));
    }
    if (t.count <= 0) throw DataError(fmt::format("transition ({}, {}) has non-positive count", t.from, t.to));
    if (!t.flow.trained()) throw DataError(fmt::format("transition ({}, {}) has no flow field", t.from, t.to));
    if (k > 0 && !(std::pair{transitions[k - 1].from, transitions[k - 1].to} < std::pair{t.from, t.to})) {
      throw DataError("transitions are not unique and sorted");
    }
  }
}

Model train_model(std::span<const NormalizedTrajectory> trajs, const GridSpec& grid, const LearnConfig& cfg) {
  grid.validate();
  if (!(cfg.dt > 0.0)) throw DataError("learning dt must be positive");
  Model model;
  model.grid = grid;
  model.episode = 1;

  std::vector<NormalizedTrajectory> resampled;
  std::vector<GridVector> vectors;
  for (const auto& t : trajs) {
    NormalizedTrajectory r;
    GridVector y;
    try {
      r = resample(t, cfg.dt);
      y = vectorize(r, grid);
    } catch (const DataError& e) {
      logger().debug("trajectory skipped: {}", e.what());
      continue;
    }
    if (y.empty()) continue;
    resampled.push_back(std::move(r));
    vectors.push_back(std::move(y));
  }
  if (vectors.empty()) return model;

  DictionaryResult learned = learn_dictionary(vectors, cfg.coding);
  model.dict = std::move(learned.dictionary);

  std::vector<std::vector<Segment>> segments;
  for (std::size_t i = 0; i < resampled.size(); ++i) {
    auto segs = segment_trajectory(resampled[i], grid, model.dict,
                                   learned.coefficients.col(static_cast<Eigen::Index>(i)), cfg.min_run);
    if (segs) segments.push_back(std::move(*segs));
  }
  const TransitionMatrix T = build_transition_matrix(segments, model.dict.size());
  MotionPrimitiveGraph graph = build_graph(T, segments);

  model.transitions.resize(graph.edges.size());
  parallel_for(graph.edges.size(), [&](std::size_t k) {
    auto& e = graph.edges[k];
    GpConfig gp = cfg.gp;
    gp.seed = cfg.gp.seed + k;
    Transition& t = model.transitions[k];
    t.from = e.from;
    t.to = e.to;
    t.count = e.count;
    t.flow = train_flowfield(e.data, gp);
    t.data = std::move(e.data);
  });
  return model;
}

}  // namespace sila
