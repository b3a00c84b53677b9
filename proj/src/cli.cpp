#include "sila/cli.hpp"

#include "sila/error.hpp"
#include "sila/experiments.hpp"
#include "sila/fusion.hpp"
#include "sila/io.hpp"
#include "sila/log.hpp"
#include "sila/parallel.hpp"
#include "sila/plot.hpp"
#include "sila/synth.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <map>

namespace sila {

namespace fs = std::filesystem;

namespace {

struct LearnFlags {
  int max_atoms = 40;
  int inducing = 15;
  int gp_iters = 200;
  int grid_rows = 25;
  int grid_cols = 29;

  void add(CLI::App* cmd, bool with_grid) {
    cmd->add_option("--max-atoms", max_atoms, "initial dictionary size")->check(CLI::PositiveNumber);
    cmd->add_option("--inducing", inducing, "pseudo-inputs per GP")->check(CLI::PositiveNumber);
    cmd->add_option("--gp-iters", gp_iters, "GP optimizer iterations")->check(CLI::NonNegativeNumber);
    if (with_grid) {
      cmd->add_option("--grid-rows", grid_rows, "grid rows (along b)")->check(CLI::PositiveNumber);
      cmd->add_option("--grid-cols", grid_cols, "grid columns (along a)")->check(CLI::PositiveNumber);
    }
  }

  LearnConfig config(std::uint64_t seed) const {
    LearnConfig cfg;
    cfg.coding.max_atoms = max_atoms;
    cfg.coding.seed = seed;
    cfg.gp.num_inducing = inducing;
    cfg.gp.max_iters = gp_iters;
    cfg.gp.seed = mix_seed(seed, 1);
    return cfg;
  }
};

struct PredictFlags {
  double horizon = 5.0;
  double obs_window = 3.2;
  double dt = 0.4;
  int max_depth = 3;
  int top_k = 5;

  void add(CLI::App* cmd) {
    cmd->add_option("--horizon", horizon, "prediction horizon (s)")->check(CLI::PositiveNumber);
    cmd->add_option("--obs-window", obs_window, "observed prefix (s)")->check(CLI::PositiveNumber);
    cmd->add_option("--dt", dt, "integration step (s)")->check(CLI::PositiveNumber);
    cmd->add_option("--max-depth", max_depth, "transitions per hypothesis")->check(CLI::NonNegativeNumber);
    cmd->add_option("--top-k", top_k, "hypotheses kept")->check(CLI::PositiveNumber);
  }

  EvalConfig config() const {
    EvalConfig cfg;
    cfg.obs_window = obs_window;
    cfg.predict.horizon = horizon;
    cfg.predict.dt = dt;
    cfg.predict.max_depth = max_depth;
    cfg.predict.top_k = top_k;
    return cfg;
  }
};

void announce(const fs::path& p) { std::cout << "wrote " << p.string() << "\n"; }

int run_generate(const std::string& tpl, int n, std::uint64_t seed, double noise, double truncate, const fs::path& out) {
  const IntersectionSetup setup = make_template(parse_corner_kind(tpl), seed);
  ScenarioConfig sc;
  sc.n_trajectories = n;
  sc.noise_std = noise;
  sc.truncate_prob = truncate;
  sc.seed = seed;
  Dataset d;
  d.frames.push_back(setup.frame);
  d.trajectories = raw_trajectories(generate_trajectories(setup, sc));
  save_dataset(d, out);
  announce(out / "trajectories.csv");
  announce(out / "frames.json");
  return 0;
}

int run_train(const fs::path& data, const fs::path& out, const LearnFlags& lf, std::uint64_t seed) {
  const auto trajs = load_dataset(data).normalized();
  const GridSpec grid = GridSpec::fit(trajs, lf.grid_rows, lf.grid_cols);
  const auto [model, seconds] = timed([&] { return train_model(trajs, grid, lf.config(seed)); });
  save_model(model, out);
  const ModelSize size = model_size(model);
  std::cout << fmt::format("trained {} primitives, {} transitions in {:.2f} s\n", size.primitives, size.transitions, seconds);
  announce(out);
  return 0;
}

int run_update(const fs::path& model_path, const fs::path& data, const fs::path& out, const std::string& mode, double t_s,
               const LearnFlags& lf, std::uint64_t seed) {
  const Model prev = load_model(model_path);
  const auto trajs = load_dataset(data).normalized();
  const LearnConfig cfg = lf.config(seed);
  const Model fresh = train_model(trajs, prev.grid, cfg);
  Model next = mode == "sila" ? incremental_learning(prev, fresh, t_s, cfg.gp) : standard_accumulate(prev, fresh);
  save_model(next, out);
  const ModelSize size = model_size(next);
  std::cout << fmt::format("episode {}: {} primitives, {} transitions\n", next.episode, size.primitives, size.transitions);
  announce(out);
  return 0;
}

NormalizedTrajectory observation_of(const NormalizedTrajectory& t, double window) {
  NormalizedTrajectory obs{t.id, {}};
  const double t0 = t.samples.front().t;
  for (const auto& s : t.samples) {
    if (s.t - t0 > window + 1e-9) break;
    obs.samples.push_back(s);
  }
  return obs;
}

int run_predict(const fs::path& model_path, const fs::path& data, const std::string& traj_id, const fs::path& out,
                const PredictFlags& pf) {
  const Model model = load_model(model_path);
  const auto trajs = load_dataset(data).normalized();
  auto it = std::find_if(trajs.begin(), trajs.end(), [&](const auto& t) { return traj_id.empty() || t.id == traj_id; });
  if (it == trajs.end()) throw DataError(fmt::format("no trajectory '{}' in {}", traj_id, data.string()));
  const EvalConfig cfg = pf.config();
  const NormalizedTrajectory obs = observation_of(*it, cfg.obs_window);
  const PredictionSet preds = predict(obs, model, cfg.predict);
  if (preds.empty()) throw DataError(fmt::format("no prediction hypothesis for '{}'", it->id));
  write_file_atomic(out, predictions_to_json(obs, preds));
  for (const auto& h : preds.hypotheses) {
    std::cout << fmt::format("weight {:.3f}  nll {:.2f}  primitives {}\n", h.weight, -h.log_lik, fmt::join(h.primitives, "->"));
  }
  announce(out);
  return 0;
}

int run_evaluate(const fs::path& model_path, const fs::path& data, const fs::path& out, const PredictFlags& pf) {
  const Model model = load_model(model_path);
  const auto trajs = load_dataset(data).normalized();
  const EvalReport report = evaluate(model, trajs, pf.config());
  std::cout << fmt::format("weighted MHD {:.4f} over {} trajectories; model {} primitives, {} transitions\n",
                           report.weighted_mhd_mean, report.per_trajectory.size(), report.model_primitives,
                           report.model_transitions);
  if (!out.empty()) {
    write_file_atomic(out, report_to_json(report));
    announce(out);
  }
  return 0;
}

struct ExperimentFlags {
  std::string methods = "batch,standard,sila:0.5,sila:0.7,sila:1.0";
  int trials = 12;
  std::size_t batch_size = 20;
  int max_episodes = 0;
  std::string data;
  std::string tpl = "right";
  int n = 988;
  bool multi = false;
  std::string timing = "on";
  int timing_repeats = 1;
  fs::path out = "results.csv";
  fs::path summary;
};

int run_experiment(const ExperimentFlags& ef, const LearnFlags& lf, std::uint64_t seed) {
  const auto methods = parse_methods(ef.methods);
  SuiteConfig sc;
  sc.batch_size = ef.batch_size;
  sc.trials = ef.trials;
  sc.base_seed = seed;
  sc.max_episodes = ef.max_episodes;
  sc.timing = ef.timing == "on";
  sc.timing_repeats = ef.timing_repeats;
  sc.learn = lf.config(seed);
  sc.learn.coding.max_iters = experiment_learn_config().coding.max_iters;
  sc.learn.gp.rel_tol = experiment_learn_config().gp.rel_tol;
  std::vector<EpisodeRecord> records;
  if (ef.multi) {
    MultiIntersectionConfig mc;
    mc.suite = sc;
    std::vector<IntersectionSetup> setups;
    const CornerKind kinds[] = {CornerKind::right, CornerKind::open, CornerKind::closed, CornerKind::right, CornerKind::open};
    for (std::size_t k = 0; k < std::size(kinds); ++k) setups.push_back(make_template(kinds[k], mix_seed(seed, 50 + k)));
    records = multi_intersection_suite(setups, methods, mc);
  } else {
    std::vector<NormalizedTrajectory> trajs;
    if (!ef.data.empty()) {
      trajs = load_dataset(ef.data).normalized();
    } else {
      const IntersectionSetup setup = make_template(parse_corner_kind(ef.tpl), seed);
      ScenarioConfig scen;
      scen.n_trajectories = ef.n;
      scen.seed = seed;
      for (const auto& st : generate_trajectories(setup, scen)) trajs.push_back(to_common_frame(st.traj, setup.frame));
    }
    records = run_episode_suite(trajs, GridSpec::fit(trajs, lf.grid_rows, lf.grid_cols), methods, sc);
  }
  write_file_atomic(ef.out, results_to_csv(records));
  announce(ef.out);
  const Summary summary = summarize(records);
  for (const auto& [method, rate] : summary.growth_rate) std::cout << fmt::format("growth rate {}: {:.4f}\n", method, rate);
  if (!ef.summary.empty()) {
    write_file_atomic(ef.summary, summary_to_csv(summary));
    announce(ef.summary);
  }
  return 0;
}

int run_plot(const fs::path& results, const fs::path& out_dir) {
  const auto records = results_from_csv(read_file(results), results.string());
  const Summary summary = summarize(records);
  std::map<std::string, Series> err, size, time;
  for (const auto& r : summary.rows) {
    for (auto* m : {&err, &size, &time}) (*m)[r.method].label = r.method;
    err[r.method].x.push_back(r.episode);
    err[r.method].y.push_back(r.mhd_mean);
    size[r.method].x.push_back(r.episode);
    size[r.method].y.push_back(r.total_mean);
    time[r.method].x.push_back(r.episode);
    time[r.method].y.push_back(r.time_mean);
  }
  auto values = [](const std::map<std::string, Series>& m) {
    std::vector<Series> v;
    for (const auto& [k, s] : m) v.push_back(s);
    return v;
  };
  const std::pair<const char*, std::string> charts[] = {
      {"error.svg", line_chart_svg("Prediction error", "episode", "weighted MHD", values(err))},
      {"size.svg", line_chart_svg("Model size", "episode", "primitives + transitions", values(size))},
      {"time.svg", line_chart_svg("Learning time", "episode", "seconds", values(time))},
  };
  for (const auto& [name, svg] : charts) {
    write_file_atomic(out_dir / name, svg);
    announce(out_dir / name);
  }
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"Similarity-based incremental learning of pedestrian motion models"};
  app.require_subcommand(1);
  std::size_t jobs = 0;
  app.add_option("--jobs", jobs, "worker threads (0 = all cores)");

  std::uint64_t seed = 0;
  LearnFlags lf;
  PredictFlags pf;

  auto* gen = app.add_subcommand("generate", "generate a synthetic intersection dataset");
  std::string tpl = "right";
  int n = 200;
  double noise = 0.1, truncate = 0.2;
  fs::path out_dir = "data";
  gen->add_option("--template", tpl, "right, open or closed")->check(CLI::IsMember({"right", "open", "closed"}));
  gen->add_option("--n", n, "number of trajectories")->check(CLI::NonNegativeNumber);
  gen->add_option("--noise", noise, "positional noise std (m)")->check(CLI::NonNegativeNumber);
  gen->add_option("--truncate-prob", truncate, "probability of a truncated trajectory")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", seed, "random seed");
  gen->add_option("--out", out_dir, "output directory");

  auto* train = app.add_subcommand("train", "learn a model from a dataset directory");
  fs::path data_dir, model_out = "model.json";
  train->add_option("--data", data_dir, "dataset directory (trajectories.csv, frames.json)")->required();
  train->add_option("--out", model_out, "model file");
  train->add_option("--seed", seed, "random seed");
  lf.add(train, true);

  auto* update = app.add_subcommand("update", "learn from a new batch and merge it into a model");
  fs::path model_in;
  std::string mode = "sila";
  double t_s = 0.7;
  update->add_option("--model", model_in, "current model file")->required();
  update->add_option("--data", data_dir, "dataset directory of the new batch")->required();
  update->add_option("--out", model_out, "updated model file");
  update->add_option("--mode", mode, "sila or standard")->check(CLI::IsMember({"sila", "standard"}));
  update->add_option("--ts", t_s, "similarity threshold")->check(CLI::Range(0.0, 1.0));
  update->add_option("--seed", seed, "random seed");
  lf.add(update, false);

  auto* pred = app.add_subcommand("predict", "predict the continuation of an observed trajectory");
  std::string traj_id;
  fs::path pred_out = "predictions.json";
  pred->add_option("--model", model_in, "model file")->required();
  pred->add_option("--data", data_dir, "dataset directory holding the trajectory")->required();
  pred->add_option("--traj", traj_id, "trajectory id (default: first)");
  pred->add_option("--out", pred_out, "predictions file");
  pred->add_option("--seed", seed, "random seed (unused; predictions are deterministic)");
  pf.add(pred);

  auto* eval = app.add_subcommand("evaluate", "score a model on a dataset");
  fs::path report_out;
  eval->add_option("--model", model_in, "model file")->required();
  eval->add_option("--data", data_dir, "dataset directory of test trajectories")->required();
  eval->add_option("--out", report_out, "report JSON file");
  eval->add_option("--seed", seed, "random seed (unused; evaluation is deterministic)");
  pf.add(eval);

  auto* exp = app.add_subcommand("experiment", "run the episode comparison of learning methods");
  ExperimentFlags ef;
  LearnFlags exp_lf;
  exp_lf.inducing = experiment_learn_config().gp.num_inducing;
  exp_lf.gp_iters = experiment_learn_config().gp.max_iters;
  exp->add_option("--methods", ef.methods, "comma-separated: batch, standard, sila:<t_s>");
  exp->add_option("--trials", ef.trials, "shuffled trials")->check(CLI::PositiveNumber);
  exp->add_option("--batch-size", ef.batch_size, "trajectories per episode")->check(CLI::PositiveNumber);
  exp->add_option("--max-episodes", ef.max_episodes, "episodes per trial (0 = all)")->check(CLI::NonNegativeNumber);
  exp->add_option("--data", ef.data, "dataset directory (default: generate one)");
  exp->add_option("--template", ef.tpl, "template of the generated dataset")->check(CLI::IsMember({"right", "open", "closed"}));
  exp->add_option("--n", ef.n, "size of the generated dataset")->check(CLI::PositiveNumber);
  exp->add_flag("--multi", ef.multi, "visit five generated intersections instead of one");
  exp->add_option("--timing", ef.timing, "record learn times (off writes zeros)")->check(CLI::IsMember({"on", "off"}));
  exp->add_option("--timing-repeats", ef.timing_repeats, "time each learning step this often, keep the fastest")
      ->check(CLI::PositiveNumber);
  exp->add_option("--out", ef.out, "results CSV");
  exp->add_option("--summary", ef.summary, "summary CSV");
  exp->add_option("--seed", seed, "base seed");
  exp_lf.add(exp, true);

  auto* plot = app.add_subcommand("plot", "draw SVG charts from a results CSV");
  fs::path results = "results.csv", plot_dir = ".";
  plot->add_option("--results", results, "results CSV")->required();
  plot->add_option("--out-dir", plot_dir, "directory for the SVG files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  configure_logging();
  set_max_jobs(jobs);
  try {
    if (gen->parsed()) return run_generate(tpl, n, seed, noise, truncate, out_dir);
    if (train->parsed()) return run_train(data_dir, model_out, lf, seed);
    if (update->parsed()) {
      if (mode == "sila" && !(t_s > 0.0)) throw DataError("--ts must lie in (0, 1]");
      return run_update(model_in, data_dir, model_out, mode, t_s, lf, seed);
    }
    if (pred->parsed()) return run_predict(model_in, data_dir, traj_id, pred_out, pf);
    if (eval->parsed()) return run_evaluate(model_in, data_dir, report_out, pf);
    if (exp->parsed()) return run_experiment(ef, exp_lf, seed);
    if (plot->parsed()) return run_plot(results, plot_dir);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

}  // namespace sila
