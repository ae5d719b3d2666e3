#pragma once

// Subcommand drivers behind the emrl executable. Each writes its artifacts
// under the configured output directory and returns a process exit code.

#include "emrl/bandit_baselines.hpp"
#include "emrl/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace emrl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNonFinite = 3;

/// config.ini, metrics.csv, checkpoint.json, a frozen evaluation
/// (eval_steps.csv, eval_metrics.csv) and its analysis tables.
int run_train(const ExperimentConfig& config, std::ostream& log);

/// Frozen-weight evaluation of a checkpoint; fails if the weights move.
int run_eval(const ExperimentConfig& config, const std::string& checkpoint, std::ostream& log);

/// baseline_<policy>_steps.csv / _metrics.csv plus regret tables.
int run_baselines(const ExperimentConfig& config, const std::vector<BaselinePolicy>& policies, std::size_t epochs,
                  std::ostream& log);

struct AnalyzeOptions {
  std::vector<std::string> step_files;
  std::vector<std::string> metric_files;
  std::string out_dir;
  bool force = false;
  int maze_horizon = kMazeHorizon;
};

/// Writes whichever tidy tables the inputs support.
int run_analyze(const AnalyzeOptions& options, std::ostream& log);

/// urn_demo.csv: draw, fresh, task_id, distinct tasks, empirical and
/// predicted fresh-draw probability.
int run_urn_demo(double alpha, std::size_t draws, std::uint64_t seed, const std::string& out_dir, std::ostream& log);

/// Loads step logs, shifting epochs so files never share an epoch index.
std::vector<TrajectoryStep> load_step_logs(const std::vector<std::string>& paths, bool force, FileStamp* stamp);

}  // namespace emrl
