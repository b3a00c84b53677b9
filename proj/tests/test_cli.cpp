#include "sila/io.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    std::random_device rd;
    dir = fs::temp_directory_path() / ("sila_cli_" + std::to_string(rd()));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(SILA_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() +
                            " 2> " + (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("generate, train, predict, evaluate and update") {
  Workspace ws;
  REQUIRE(ws.run("generate --n 60 --seed 3 --out " + ws.path("data")) == 0);
  CHECK(fs::exists(ws.path("data/trajectories.csv")));
  CHECK(fs::exists(ws.path("data/frames.json")));
  const auto data = sila::load_dataset(ws.path("data"));
  CHECK(data.trajectories.size() == 60);
  CHECK(count_lines(sila::read_file(ws.path("data/trajectories.csv"))) > 60);

  REQUIRE(ws.run("train --data " + ws.path("data") + " --gp-iters 10 --out " + ws.path("model.json")) == 0);
  const auto model = sila::load_model(ws.path("model.json"));
  CHECK(model.dict.size() >= 1);

  REQUIRE(ws.run("predict --model " + ws.path("model.json") + " --data " + ws.path("data") + " --out " +
                 ws.path("pred.json")) == 0);
  const auto pred = nlohmann::json::parse(sila::read_file(ws.path("pred.json")));
  CHECK(pred["version"] == sila::kFormatVersion);
  CHECK(pred.contains("hypotheses"));

  REQUIRE(ws.run("evaluate --model " + ws.path("model.json") + " --data " + ws.path("data") + " --out " +
                 ws.path("report.json")) == 0);
  const auto report = nlohmann::json::parse(sila::read_file(ws.path("report.json")));
  CHECK(report["weighted_mhd_mean"].get<double>() >= 0.0);

  REQUIRE(ws.run("generate --n 30 --seed 4 --out " + ws.path("batch2")) == 0);
  REQUIRE(ws.run("update --model " + ws.path("model.json") + " --data " + ws.path("batch2") +
                 " --gp-iters 10 --ts 0.7 --out " + ws.path("model2.json")) == 0);
  const auto updated = sila::load_model(ws.path("model2.json"));
  CHECK(updated.episode == model.episode + 1);
}

TEST_CASE("generation is deterministic for a seed") {
  Workspace ws;
  REQUIRE(ws.run("generate --n 20 --seed 9 --out " + ws.path("a")) == 0);
  REQUIRE(ws.run("generate --n 20 --seed 9 --out " + ws.path("b")) == 0);
  CHECK(sila::read_file(ws.path("a/trajectories.csv")) == sila::read_file(ws.path("b/trajectories.csv")));
}

TEST_CASE("usage errors exit with 1") {
  Workspace ws;
  CHECK(ws.run("") == 1);
  CHECK(ws.run("generate --bogus") == 1);
  CHECK(ws.run("frobnicate") == 1);
  CHECK(ws.run("train") == 1);
  CHECK(ws.run("generate --template square") == 1);
  CHECK(ws.run("--help") == 0);
}

TEST_CASE("data errors exit with 2") {
  Workspace ws;
  CHECK(ws.run("train --data " + ws.path("missing")) == 2);
  fs::create_directories(ws.path("bad"));
  sila::write_file_atomic(ws.path("bad/trajectories.csv"), "traj_id,t,x,y\na,0,0\n");
  sila::write_file_atomic(ws.path("bad/frames.json"), "{\"version\": 1, \"frames\": []}");
  CHECK(ws.run("train --data " + ws.path("bad")) == 2);
  sila::write_file_atomic(ws.path("model.json"), "{\"version\": 99}");
  REQUIRE(ws.run("generate --n 5 --out " + ws.path("data")) == 0);
  CHECK(ws.run("evaluate --model " + ws.path("model.json") + " --data " + ws.path("data")) == 2);
  CHECK(sila::read_file(ws.path("stderr.txt")).find("version") != std::string::npos);
}

TEST_CASE("experiment writes results and summary") {
  Workspace ws;
  REQUIRE(ws.run("experiment --n 60 --batch-size 20 --max-episodes 2 --trials 1 --methods standard,sila:0.7 "
                 "--timing off --gp-iters 5 --out " +
                 ws.path("results.csv") + " --summary " + ws.path("summary.csv")) == 0);
  const auto rs = sila::results_from_csv(sila::read_file(ws.path("results.csv")));
  CHECK(rs.size() == 4);
  for (const auto& r : rs) CHECK(r.learn_time_s == 0.0);
  CHECK(count_lines(sila::read_file(ws.path("summary.csv"))) == 5);
  REQUIRE(ws.run("plot --results " + ws.path("results.csv") + " --out-dir " + ws.path("plots")) == 0);
  CHECK(fs::exists(ws.path("plots/error.svg")));
}
