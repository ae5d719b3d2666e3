#pragma once

// Experiment configuration: a strict sectioned key=value format, named
// presets and the content hash stamped on every output file.

#include "emrl/agent.hpp"
#include "emrl/trainer.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace emrl {

struct ExperimentConfig {
  std::string preset;
  AgentVariant variant = AgentVariant::EpL2rl;
  int hidden = 50;
  std::size_t dnd_k = 1;
  double kernel_delta = Dnd::kDefaultKernelDelta;
  TaskSetup task;
  TrainConfig train;
  std::size_t eval_epochs = 10;
  bool eval_greedy = false;
  std::string out_dir = "run";
};

/// Invalid configuration text; the message names the line and key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Applies "[section]" / "key = value" lines on top of `base`. Unknown
/// sections or keys, malformed lines and bad values are rejected.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {});

/// Sets one "section.key" field from text.
void set_config_value(ExperimentConfig& config, const std::string& dotted_key, const std::string& value);

/// Canonical text form; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const ExperimentConfig& config);

/// FNV-1a of the canonical form with the seed and output directory left
/// out, so runs that differ only in seed can be pooled.
std::string config_hash(const ExperimentConfig& config);

/// Fills derived fields (epoch positions, class dims) and checks ranges.
void finalize_config(ExperimentConfig& config);

std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

}  // namespace emrl
