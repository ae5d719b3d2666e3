#include "emrl/config.hpp"
#include "emrl/run.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace emrl;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("emrl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c = preset("barcode_desk");
  c.train.train_epochs = 2;
  c.train.batch_size = 2;
  c.eval_epochs = 2;
  c.hidden = 8;
  c.out_dir = out.string();
  finalize_config(c);
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EMRL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("unknown keys are rejected with their name and line") {
  std::istringstream in("[train]\nepochs = 3\n\n[agent]\nhiden = 10\n");
  try {
    parse_config(in);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 5") != std::string::npos);
    CHECK(msg.find("hiden") != std::string::npos);
  }
  std::istringstream bad_section("[trainer]\nepochs = 3\n");
  CHECK_THROWS_AS(parse_config(bad_section), ConfigError);
  std::istringstream bad_value("[train]\nepochs = many\n");
  CHECK_THROWS_AS(parse_config(bad_value), ConfigError);
  std::istringstream orphan("epochs = 3\n");
  CHECK_THROWS_AS(parse_config(orphan), ConfigError);
  ExperimentConfig c;
  CHECK_THROWS_AS(set_config_value(c, "train.nope", "1"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "epochs", "1"), ConfigError);
}

TEST_CASE("config text round-trips and comments are ignored") {
  std::istringstream in("# header\n[train]\nepochs = 7  # trailing\nlearning_rate = 0.002\n[agent]\nhidden = 12\n");
  ExperimentConfig c = parse_config(in, preset("barcode"));
  CHECK(c.train.train_epochs == 7);
  CHECK(c.train.learning_rate == 0.002);
  CHECK(c.hidden == 12);
  std::istringstream again(serialize_config(c));
  const ExperimentConfig d = parse_config(again);
  CHECK(serialize_config(d) == serialize_config(c));
  CHECK(config_hash(d) == config_hash(c));
}

TEST_CASE("config hash ignores the seed and output but not the experiment") {
  ExperimentConfig a = preset("barcode");
  ExperimentConfig b = a;
  b.train.seed = 99;
  b.out_dir = "elsewhere";
  b.train.threads = 4;
  CHECK(config_hash(a) == config_hash(b));
  b.train.learning_rate *= 2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("every preset finalizes") {
  for (const auto& name : preset_names()) {
    ExperimentConfig c = preset(name);
    CHECK_NOTHROW(finalize_config(c));
  }
  CHECK_THROWS_AS(preset("nope"), ConfigError);
  ExperimentConfig c = preset("barcode");
  c.task.epoch.n_unique_contexts = 3;
  CHECK_THROWS_AS(finalize_config(c), ConfigError);
}

TEST_CASE("training twice with one seed writes identical logs") {
  const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
  std::ostringstream log;
  REQUIRE(run_train(tiny(a), log) == kExitOk);
  REQUIRE(run_train(tiny(b), log) == kExitOk);
  for (const char* f : {"metrics.csv", "eval_steps.csv", "checkpoint.json", "analysis/regret_by_exposure.csv"}) {
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

TEST_CASE("evaluating a checkpoint leaves it unchanged and reproduces the eval log") {
  const auto dir = scratch_dir("eval");
  std::ostringstream log;
  const auto cfg = tiny(dir);
  REQUIRE(run_train(cfg, log) == kExitOk);
  const std::string before = slurp(dir / "checkpoint.json");
  auto eval_cfg = cfg;
  eval_cfg.out_dir = (dir / "re").string();
  CHECK(run_eval(eval_cfg, (dir / "checkpoint.json").string(), log) == kExitOk);
  CHECK(slurp(dir / "checkpoint.json") == before);
  CHECK(slurp(dir / "re" / "eval_steps.csv") == slurp(dir / "eval_steps.csv"));

  auto maze = preset("maze_desk");
  finalize_config(maze);
  maze.out_dir = (dir / "maze").string();
  CHECK(run_eval(maze, (dir / "checkpoint.json").string(), log) == kExitUsage);
}

TEST_CASE("analysis refuses logs from different configurations unless forced") {
  const auto dir = scratch_dir("merge");
  std::ostringstream log;
  auto a = tiny(dir / "a");
  auto b = tiny(dir / "b");
  b.train.learning_rate = 5e-4;
  REQUIRE(run_train(a, log) == kExitOk);
  REQUIRE(run_train(b, log) == kExitOk);
  AnalyzeOptions o;
  o.step_files = {(dir / "a" / "eval_steps.csv").string(), (dir / "b" / "eval_steps.csv").string()};
  o.out_dir = (dir / "merged").string();
  CHECK_THROWS(run_analyze(o, log));
  o.force = true;
  CHECK(run_analyze(o, log) == kExitOk);

  auto c = tiny(dir / "c");
  c.train.seed = 2;
  REQUIRE(run_train(c, log) == kExitOk);
  o.force = false;
  o.step_files = {(dir / "a" / "eval_steps.csv").string(), (dir / "c" / "eval_steps.csv").string()};
  CHECK(run_analyze(o, log) == kExitOk);
}

TEST_CASE("command line exit codes") {
  const auto dir = scratch_dir("cli");
  CHECK(run_cli("preset-list") == 0);
  CHECK(run_cli("train --preset barcode_desk --set agent.hiden=3 --out " + (dir / "x").string()) == 2);
  CHECK(run_cli("train --preset no_such_preset --out " + (dir / "x").string()) == 2);
  CHECK(run_cli("train --preset barcode_desk --set train.epochs=1 --set agent.hidden=4 --out " + (dir / "ok").string()) ==
        0);
  CHECK(fs::exists(dir / "ok" / "metrics.csv"));
  CHECK(run_cli("urn-demo --alpha 2 --draws 50 --out " + (dir / "urn").string()) == 0);
  CHECK(fs::exists(dir / "urn" / "urn_demo.csv"));
}
