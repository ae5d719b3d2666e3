#include "emrl/run.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace emrl;

namespace {

struct Common {
  std::string config_file;
  std::string preset_name;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::size_t workers = 0;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "Config file (sectioned key = value)");
  cmd->add_option("--preset", c.preset_name, "Start from a named preset");
  cmd->add_option("--seed", c.seed, "Random seed")->each([&](const std::string&) { c.seed_set = true; });
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--workers", c.workers, "Parallel rollout workers");
  cmd->add_option("--set", c.overrides, "Override a config field: section.key=value");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig config = c.preset_name.empty() ? ExperimentConfig{} : preset(c.preset_name);
  if (!c.config_file.empty()) config = load_config_file(c.config_file, config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed_set) config.train.seed = c.seed;
  if (!c.out.empty()) config.out_dir = c.out;
  if (c.workers > 0) config.train.batch_size = c.workers;
  finalize_config(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Episodic meta-reinforcement-learning lab"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, base_opts;
  std::string checkpoint;
  bool eval_only = false;
  auto* train = app.add_subcommand("train", "Train an agent, then evaluate it with frozen weights");
  add_common(train, train_opts);
  train->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate with --eval-only");
  train->add_flag("--eval-only", eval_only, "Skip training and evaluate --checkpoint");

  std::string eval_checkpoint;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with frozen weights");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_checkpoint, "Agent checkpoint (checkpoint.json)")->required();
  eval->add_flag("--eval-only", "Accepted for symmetry with train");

  std::vector<std::string> policies{"gittins", "ucb", "thompson", "random"};
  std::size_t baseline_epochs = 100;
  auto* baseline = app.add_subcommand("baseline", "Run classical bandit baselines");
  add_common(baseline, base_opts);
  baseline->add_option("--policy", policies, "Policies to run")->check(CLI::IsMember({"gittins", "ucb", "thompson", "random"}));
  baseline->add_option("--epochs", baseline_epochs, "Epochs of episodes to play");

  AnalyzeOptions analyze_opts;
  std::string analyze_out = "analysis";
  auto* analyze = app.add_subcommand("analyze", "Turn logs into tidy figure tables");
  analyze->add_option("--steps", analyze_opts.step_files, "Step logs (eval_steps.csv, baseline_*_steps.csv)");
  analyze->add_option("--metrics", analyze_opts.metric_files, "Per-episode metrics logs");
  analyze->add_option("--out", analyze_out, "Output directory");
  analyze->add_option("--maze-horizon", analyze_opts.maze_horizon, "Censoring horizon for maze logs");
  analyze->add_flag("--force", analyze_opts.force, "Merge files even when config hashes differ");

  double alpha = 1.0;
  std::size_t draws = 1000;
  std::uint64_t urn_seed = 1;
  std::string urn_out = "urn";
  auto* urn = app.add_subcommand("urn-demo", "Simulate the Blackwell-MacQueen urn");
  urn->add_option("--alpha", alpha, "Concentration");
  urn->add_option("--draws", draws, "Number of draws");
  urn->add_option("--seed", urn_seed, "Random seed");
  urn->add_option("--out", urn_out, "Output directory");

  auto* list = app.add_subcommand("preset-list", "List presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto config = resolve(train_opts);
      if (eval_only) {
        if (checkpoint.empty()) throw ConfigError("--eval-only needs --checkpoint");
        return run_eval(config, checkpoint, std::cout);
      }
      return run_train(config, std::cout);
    }
    if (*eval) return run_eval(resolve(eval_opts), eval_checkpoint, std::cout);
    if (*baseline) {
      std::vector<BaselinePolicy> ps;
      for (const auto& p : policies) ps.push_back(baseline_policy_from_string(p));
      return run_baselines(resolve(base_opts), ps, baseline_epochs, std::cout);
    }
    if (*analyze) {
      analyze_opts.out_dir = analyze_out;
      return run_analyze(analyze_opts, std::cout);
    }
    if (*urn) return run_urn_demo(alpha, draws, urn_seed, urn_out, std::cout);
    if (*list) {
      for (const auto& name : preset_names()) {
        const auto c = preset(name);
        std::cout << name << '\t' << to_string(c.task.env.kind) << '\n';
      }
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NonFiniteError& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kExitNonFinite;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
