#include "sila/experiments.hpp"

#include "sila/error.hpp"
#include "sila/fusion.hpp"
#include "sila/log.hpp"
#include "sila/parallel.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>

namespace sila {

namespace {

struct EpisodeInput {
  std::vector<NormalizedTrajectory> train;
  std::vector<NormalizedTrajectory> test;
};

LearnConfig seeded(const LearnConfig& base, std::uint64_t base_seed, int trial, int episode) {
  LearnConfig cfg = base;
  const std::uint64_t s = mix_seed(base_seed, static_cast<std::uint64_t>(trial) * 100003u + static_cast<std::uint64_t>(episode));
  cfg.coding.seed = s;
  cfg.gp.seed = mix_seed(s, 1);
  return cfg;
}

std::vector<EpisodeRecord> run_trial(const std::vector<EpisodeInput>& episodes, const GridSpec& grid,
                                     std::span<const MethodSpec> methods, const SuiteConfig& cfg, int trial) {
  const bool need_episode_model = std::any_of(methods.begin(), methods.end(),
                                              [](const MethodSpec& m) { return m.kind != MethodKind::batch; });
  std::vector<Model> state(methods.size());
  for (auto& m : state) m.grid = grid;
  std::vector<NormalizedTrajectory> seen;
  std::vector<EpisodeRecord> records;
  auto measure = [&](auto&& learn_step) {
    auto [result, best] = timed(learn_step);
    if (cfg.timing)
      for (int r = 1; r < cfg.timing_repeats; ++r) best = std::min(best, timed(learn_step).second);
    return std::pair{std::move(result), best};
  };
  int cumulative = 0;

  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const int episode = static_cast<int>(e) + 1;
    const LearnConfig learn = seeded(cfg.learn, cfg.base_seed, trial, episode);
    const auto& batch = episodes[e].train;
    seen.insert(seen.end(), batch.begin(), batch.end());
    cumulative += static_cast<int>(batch.size());

    Model fresh;
    double fresh_time = 0.0;
    if (need_episode_model) std::tie(fresh, fresh_time) = measure([&] { return train_model(batch, grid, learn); });

    for (std::size_t k = 0; k < methods.size(); ++k) {
      const MethodSpec& m = methods[k];
      double seconds = 0.0;
      switch (m.kind) {
        case MethodKind::batch:
          std::tie(state[k], seconds) = measure([&] { return train_model(seen, grid, learn); });
          state[k].episode = episode;
          break;
        case MethodKind::standard:
          std::tie(state[k], seconds) = measure([&] { return standard_accumulate(state[k], fresh); });
          seconds += fresh_time;
          break;
        case MethodKind::sila:
          std::tie(state[k], seconds) = measure([&] { return incremental_learning(state[k], fresh, m.t_s, learn.gp); });
          seconds += fresh_time;
          break;
      }
      const EvalReport report = evaluate(state[k], episodes[e].test, cfg.eval);
      EpisodeRecord r;
      r.method = m.label();
      r.trial = trial;
      r.episode = episode;
      r.weighted_mhd = report.weighted_mhd_mean;
      r.primitives = report.model_primitives;
      r.transitions = report.model_transitions;
      r.cumulative_trajectories = cumulative;
      r.learn_time_s = cfg.timing ? seconds : 0.0;
      logger().info("trial {} episode {} {}: mhd {:.4f} size {}+{} time {:.3f}s", trial, episode, r.method,
                    r.weighted_mhd, r.primitives, r.transitions, seconds);
      records.push_back(std::move(r));
    }
  }
  return records;
}

std::vector<EpisodeRecord> run_trials(int trials, const std::function<std::vector<EpisodeRecord>(int)>& one) {
  if (trials < 1) throw DataError("at least one trial is required");
  std::vector<std::vector<EpisodeRecord>> per_trial(static_cast<std::size_t>(trials));
  parallel_for(per_trial.size(), [&](std::size_t t) { per_trial[t] = one(static_cast<int>(t) + 1); });
  std::vector<EpisodeRecord> out;
  for (auto& v : per_trial) out.insert(out.end(), v.begin(), v.end());
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw DataError(fmt::format("invalid {} '{}'", what, s));
  return v;
}

}  // namespace

std::string MethodSpec::label() const {
  switch (kind) {
    case MethodKind::batch: return "batch";
    case MethodKind::standard: return "standard";
    case MethodKind::sila: {
      std::string s = fmt::format("sila:{}", t_s);
      if (s.find_first_of(".e") == std::string::npos) s += ".0";
      return s;
    }
  }
  throw InternalError("unknown method kind");
}

void MethodSpec::validate() const {
  if (kind == MethodKind::sila && !(t_s > 0.0 && t_s <= 1.0)) throw DataError("sila threshold must lie in (0, 1]");
}

std::vector<MethodSpec> parse_methods(const std::string& list) {
  std::vector<MethodSpec> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    const std::string item = list.substr(start, comma - start);
    if (item == "batch") {
      out.push_back({MethodKind::batch, 1.0});
    } else if (item == "standard") {
      out.push_back({MethodKind::standard, 1.0});
    } else if (item.rfind("sila:", 0) == 0) {
      out.push_back({MethodKind::sila, parse_double(item.substr(5), "similarity threshold")});
    } else if (item == "sila") {
      out.push_back({MethodKind::sila, 0.7});
    } else {
      throw DataError(fmt::format("unknown method '{}' (expected batch, standard or sila:<t_s>)", item));
    }
    out.back().validate();
    start = comma + 1;
  }
  if (out.empty()) throw DataError("no methods given");
  return out;
}

LearnConfig experiment_learn_config() {
  LearnConfig cfg;
  cfg.coding.max_iters = 30;
  cfg.gp.num_inducing = 10;
  cfg.gp.max_iters = 40;
  cfg.gp.rel_tol = 1e-4;
  return cfg;
}

std::vector<EpisodeRecord> run_episode_suite(std::span<const NormalizedTrajectory> data, const GridSpec& grid,
                                             std::span<const MethodSpec> methods, const SuiteConfig& cfg) {
  if (methods.empty()) throw DataError("no methods given");
  for (const auto& m : methods) m.validate();
  if (cfg.timing_repeats < 1) throw DataError("timing repeats must be at least 1");
  grid.validate();
  return run_trials(cfg.trials, [&](int trial) {
    const EpisodeSplit split = split_episodes(data.size(), cfg.batch_size, cfg.base_seed,
                                              mix_seed(cfg.base_seed, static_cast<std::uint64_t>(trial)),
                                              cfg.test_fraction);
    std::vector<NormalizedTrajectory> test;
    for (std::size_t i : split.test) test.push_back(data[i]);
    std::vector<EpisodeInput> episodes;
    for (const auto& b : split.batches) {
      if (cfg.max_episodes > 0 && static_cast<int>(episodes.size()) >= cfg.max_episodes) break;
      EpisodeInput in;
      for (std::size_t i : b) in.train.push_back(data[i]);
      in.test = test;
      episodes.push_back(std::move(in));
    }
    return run_trial(episodes, grid, methods, cfg, trial);
  });
}

std::vector<EpisodeRecord> multi_intersection_suite(const std::vector<IntersectionSetup>& setups,
                                                    std::span<const MethodSpec> methods,
                                                    const MultiIntersectionConfig& cfg) {
  if (setups.size() < 2) throw DataError("the multi-intersection suite needs at least two intersections");
  if (methods.empty()) throw DataError("no methods given");
  for (const auto& m : methods) m.validate();
  if (cfg.suite.timing_repeats < 1) throw DataError("timing repeats must be at least 1");
  if (cfg.train_per_intersection < 1 || cfg.test_per_intersection < 1) {
    throw DataError("each intersection needs training and test trajectories");
  }

  struct Site {
    std::vector<NormalizedTrajectory> train, test;
  };
  std::vector<Site> sites;
  std::vector<NormalizedTrajectory> everything;
  for (std::size_t s = 0; s < setups.size(); ++s) {
    ScenarioConfig sc = cfg.scenario;
    sc.n_trajectories = cfg.train_per_intersection + cfg.test_per_intersection;
    sc.seed = mix_seed(cfg.suite.base_seed, 1000 + s);
    Site site;
    int k = 0;
    for (const auto& st : generate_trajectories(setups[s], sc)) {
      auto n = to_common_frame(st.traj, setups[s].frame);
      everything.push_back(n);
      (k++ < cfg.train_per_intersection ? site.train : site.test).push_back(std::move(n));
    }
    sites.push_back(std::move(site));
  }
  const GridSpec grid = GridSpec::fit(everything);

  return run_trials(cfg.suite.trials, [&](int trial) {
    std::vector<std::size_t> order(sites.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(cfg.suite.base_seed, static_cast<std::uint64_t>(trial)));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<EpisodeInput> episodes;
    std::vector<NormalizedTrajectory> test_so_far;
    for (std::size_t s : order) {
      test_so_far.insert(test_so_far.end(), sites[s].test.begin(), sites[s].test.end());
      episodes.push_back({sites[s].train, test_so_far});
    }
    return run_trial(episodes, grid, methods, cfg.suite, trial);
  });
}

double ls_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw DataError("slope needs equally long, non-empty samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw DataError("slope is undefined for constant x");
  return sxy / sxx;
}

Summary summarize(std::span<const EpisodeRecord> records) {
  if (records.empty()) throw DataError("nothing to summarize");
  std::map<std::pair<std::string, int>, std::vector<const EpisodeRecord*>> groups;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> growth;
  for (const auto& r : records) {
    groups[{r.method, r.episode}].push_back(&r);
    growth[r.method].first.push_back(r.cumulative_trajectories);
    growth[r.method].second.push_back(r.total_size());
  }
  auto stats = [](const std::vector<const EpisodeRecord*>& g, auto field) {
    double mean = 0.0;
    for (const auto* r : g) mean += field(*r);
    mean /= static_cast<double>(g.size());
    double var = 0.0;
    for (const auto* r : g) var += (field(*r) - mean) * (field(*r) - mean);
    return std::pair{mean, std::sqrt(var / static_cast<double>(g.size()))};
  };
  Summary out;
  for (const auto& [key, g] : groups) {
    SummaryRow row;
    row.method = key.first;
    row.episode = key.second;
    row.trials = static_cast<int>(g.size());
    std::tie(row.mhd_mean, row.mhd_std) = stats(g, [](const EpisodeRecord& r) { return r.weighted_mhd; });
    std::tie(row.primitives_mean, row.primitives_std) =
        stats(g, [](const EpisodeRecord& r) { return static_cast<double>(r.primitives); });
    std::tie(row.transitions_mean, row.transitions_std) =
        stats(g, [](const EpisodeRecord& r) { return static_cast<double>(r.transitions); });
    std::tie(row.total_mean, row.total_std) =
        stats(g, [](const EpisodeRecord& r) { return static_cast<double>(r.total_size()); });
    std::tie(row.time_mean, row.time_std) = stats(g, [](const EpisodeRecord& r) { return r.learn_time_s; });
    out.rows.push_back(row);
  }
  for (const auto& [method, xy] : growth) {
    try {
      out.growth_rate[method] = ls_slope(xy.first, xy.second);
    } catch (const DataError&) {
      // a single episode gives no slope
    }
  }
  return out;
}

}  // namespace sila
