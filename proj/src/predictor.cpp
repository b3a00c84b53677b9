#include "sila/predictor.hpp"

#include "sila/error.hpp"
#include "sila/log.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace sila {

namespace {

double transition_log_prob(const Model& model, int from, int to) {
  const Transition* t = model.find(from, to);
  if (t == nullptr) return -std::numeric_limits<double>::infinity();
  return std::log(static_cast<double>(t->count) / static_cast<double>(model.out_count(from)));
}

bool has_outgoing(const Model& model, int atom) {
  return std::any_of(model.transitions.begin(), model.transitions.end(),
                     [&](const Transition& t) { return t.from == atom; });
}

double cell_strength(const Model& model, int atom, int cell) {
  const Vec2* v = model.dict.atom(atom).field.find(cell);
  return v ? v->norm() : 0.0;
}

void dfs(const Model& model, std::vector<int>& path, std::set<int>& on_path, int max_depth,
         std::vector<std::vector<int>>& out) {
  if (static_cast<int>(path.size()) - 1 >= max_depth) return;
  const int tail = path.back();
  for (const auto& t : model.transitions) {
    if (t.from != tail || on_path.contains(t.to)) continue;
    path.push_back(t.to);
    on_path.insert(t.to);
    out.push_back(path);
    dfs(model, path, on_path, max_depth, out);
    on_path.erase(t.to);
    path.pop_back();
  }
}

}  // namespace

std::vector<FlowSample> observation_samples(const NormalizedTrajectory& obs, double dt) {
  const auto kin = finite_differences(resample(obs, dt).samples);
  std::vector<FlowSample> out;
  out.reserve(kin.size());
  for (const auto& k : kin) out.push_back({k.p, k.v});
  return out;
}

std::vector<Candidate> classify_observation(const NormalizedTrajectory& obs, const Model& model,
                                            const PredictConfig& cfg) {
  if (model.empty()) throw DataError("cannot classify against an empty model");
  const NormalizedTrajectory r = resample(obs, cfg.dt);
  const GridVector y = vectorize(r, model.grid);
  if (y.empty()) throw DataError("observation lies outside the grid");
  const Eigen::VectorXd code = sparse_code(y, model.dict, cfg.lambda_scale * y.squared_norm());
  const auto samples = observation_samples(obs, cfg.dt);

  std::vector<Candidate> out;
  for (const auto& atom : model.dict.atoms) {
    const bool overlaps = std::any_of(y.cells().begin(), y.cells().end(),
                                      [&](const CellVelocity& c) { return atom.field.find(c.cell) != nullptr; });
    if (!overlaps) continue;
    double best = -std::numeric_limits<double>::infinity();
    const bool outgoing = has_outgoing(model, atom.id);
    for (const auto& t : model.transitions) {
      if ((outgoing ? t.from : t.to) != atom.id) continue;
      best = std::max(best, log_likelihood(t.flow, samples));
    }
    if (best == -std::numeric_limits<double>::infinity()) continue;
    const double c = std::max(code(atom.id - 1), 1e-12);
    out.push_back({atom.id, std::log(c) + best});
  }
  if (out.empty()) throw DataError("observation overlaps no primitive with transitions");
  std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  return out;
}

std::vector<std::vector<int>> enumerate_paths(const Model& model, int start, int max_depth) {
  model.dict.atom(start);  // validates the id
  std::vector<std::vector<int>> out{{start}};
  std::vector<int> path{start};
  std::set<int> on_path{start};
  dfs(model, path, on_path, max_depth, out);
  return out;
}

const Transition* rollout_edge(const Model& model, const std::vector<int>& path, std::size_t pos) {
  const int a = path[pos];
  if (pos + 1 < path.size()) return model.find(a, path[pos + 1]);
  if (const Transition* self = model.find(a, a)) return self;
  if (pos > 0) {
    if (const Transition* in = model.find(path[pos - 1], a)) return in;
  }
  const Transition* best = nullptr;
  for (const auto& t : model.transitions) {
    if ((t.from == a || t.to == a) && (best == nullptr || t.count > best->count)) best = &t;
  }
  return best;
}

std::optional<std::vector<Vec2>> rollout(const Model& model, const std::vector<int>& path, const Vec2& start,
                                         double dt, double horizon) {
  if (path.empty()) throw DataError("rollout needs a non-empty path");
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw DataError("rollout needs dt > 0 and horizon >= 0");
  const int steps = static_cast<int>(std::floor(horizon / dt + 1e-9));
  std::vector<Vec2> points;
  points.reserve(static_cast<std::size_t>(steps));
  std::size_t pos = 0;
  Vec2 p = start;
  for (int s = 0; s < steps; ++s) {
    if (pos + 1 < path.size()) {
      if (const auto cell = cell_index(p, model.grid)) {
        if (cell_strength(model, path[pos + 1], *cell) > cell_strength(model, path[pos], *cell)) ++pos;
      }
    }
    const Transition* edge = rollout_edge(model, path, pos);
    if (edge == nullptr || !edge->flow.trained()) {
      logger().debug("rollout stopped: no flow field for primitive {}", path[pos]);
      return std::nullopt;
    }
    p += dt * predict_velocity(edge->flow, p).mean;
    if (!p.allFinite()) return std::nullopt;
    points.push_back(p);
  }
  return points;
}

PredictionSet predict(const NormalizedTrajectory& obs, const Model& model, const PredictConfig& cfg) {
  validate_samples(obs.samples, obs.id);
  const auto candidates = classify_observation(obs, model, cfg);
  const auto samples = observation_samples(obs, cfg.dt);
  const Vec2 start = obs.samples.back().p;

  std::vector<Hypothesis> hyps;
  const auto n_start = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(std::max(cfg.start_candidates, 1)));
  for (std::size_t c = 0; c < n_start; ++c) {
    const int a = candidates[c].atom;
    const bool self = model.find(a, a) != nullptr;
    const bool outgoing = has_outgoing(model, a);
    for (auto& path : enumerate_paths(model, a, cfg.max_depth)) {
      double log_prob = 0.0;
      if (path.size() == 1) {
        // Staying put is only a hypothesis when it was observed or forced.
        if (outgoing && !self) continue;
        if (self) log_prob = transition_log_prob(model, a, a);
      } else {
        for (std::size_t k = 0; k + 1 < path.size(); ++k) log_prob += transition_log_prob(model, path[k], path[k + 1]);
      }
      const Transition* first = rollout_edge(model, path, 0);
      if (first == nullptr) continue;
      auto points = rollout(model, path, start, cfg.dt, cfg.horizon);
      if (!points) continue;
      const double ll = log_likelihood(first->flow, samples) + log_prob;
      if (!std::isfinite(ll)) continue;
      hyps.push_back({std::move(*points), std::move(path), ll, 0.0});
    }
  }
  if (hyps.empty()) {
    logger().warn("no viable prediction hypothesis for '{}'", obs.id);
    return {};
  }
  std::stable_sort(hyps.begin(), hyps.end(), [](const Hypothesis& x, const Hypothesis& y) { return x.log_lik > y.log_lik; });
  if (static_cast<int>(hyps.size()) > cfg.top_k) hyps.resize(static_cast<std::size_t>(std::max(cfg.top_k, 1)));
  const double top = hyps.front().log_lik;
  double z = 0.0;
  for (const auto& h : hyps) z += std::exp(h.log_lik - top);
  for (auto& h : hyps) h.weight = std::exp(h.log_lik - top) / z;
  return {std::move(hyps)};
}

}  // namespace sila
