#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace emrl {

/// One logged environment step. For the two-step task `episode` is the
/// traversal index inside the epoch and `step` the stage (0 or 1).
struct TrajectoryStep {
  std::size_t epoch = 0;
  std::size_t episode = 0;
  int step = 0;
  std::size_t task_id = 0;
  std::size_t exposure = 0;
  int action = 0;
  double reward = 0.0;
  double optimal_expected_reward = 0.0;
  double chosen_expected_reward = 0.0;
  double value_estimate = 0.0;
  double r_gate_mean = 0.0;
  int stage = 0;
  bool cued = false;
  int transition = -1;  // 0 common, 1 uncommon, -1 n/a
  int state_reached = -1;
  long cue_ref = -1;
  int position = -1;
  int target = -1;
  bool goal_reached = false;
};

/// Header stamped on every emitted file: "# emrl config_hash=<hex> seed=<n>".
struct FileStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
};

std::string format_stamp(const FileStamp& stamp);
/// Parses a stamp line; returns false when the line is not a stamp.
bool parse_stamp(const std::string& line, FileStamp& stamp);

/// Shortest round-trip-stable text for a double ('.' decimal separator).
std::string format_number(double v);

extern const char* const kStepColumns;

void write_steps_csv(std::ostream& out, const FileStamp& stamp, const std::vector<TrajectoryStep>& steps);
std::vector<TrajectoryStep> read_steps_csv(std::istream& in, FileStamp* stamp = nullptr);

}  // namespace emrl
