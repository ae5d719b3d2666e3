#include "emrl/trajectory.hpp"
#include "emrl/common.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace emrl {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_stamp(const FileStamp& stamp) {
  return "# emrl config_hash=" + stamp.config_hash + " seed=" + std::to_string(stamp.seed);
}

bool parse_stamp(const std::string& line, FileStamp& stamp) {
  const std::string prefix = "# emrl config_hash=";
  if (line.rfind(prefix, 0) != 0) return false;
  const auto space = line.find(" seed=", prefix.size());
  if (space == std::string::npos) return false;
  stamp.config_hash = line.substr(prefix.size(), space - prefix.size());
  stamp.seed = std::stoull(line.substr(space + 6));
  return true;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const char* const kStepColumns =
    "epoch,episode,step,task_id,exposure,action,reward,optimal_expected_reward,chosen_expected_reward,"
    "value_estimate,r_gate_mean,stage,cued,transition,state_reached,cue_ref,position,target,goal_reached";

void write_steps_csv(std::ostream& out, const FileStamp& stamp, const std::vector<TrajectoryStep>& steps) {
  out << format_stamp(stamp) << '\n' << kStepColumns << '\n';
  for (const auto& s : steps) {
    out << s.epoch << ',' << s.episode << ',' << s.step << ',' << s.task_id << ',' << s.exposure << ',' << s.action
        << ',' << format_number(s.reward) << ',' << format_number(s.optimal_expected_reward) << ','
        << format_number(s.chosen_expected_reward) << ',' << format_number(s.value_estimate) << ','
        << format_number(s.r_gate_mean) << ',' << s.stage << ',' << (s.cued ? 1 : 0) << ',' << s.transition << ','
        << s.state_reached << ',' << s.cue_ref << ',' << s.position << ',' << s.target << ','
        << (s.goal_reached ? 1 : 0) << '\n';
  }
}

std::vector<TrajectoryStep> read_steps_csv(std::istream& in, FileStamp* stamp) {
  std::vector<TrajectoryStep> steps;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (stamp) parse_stamp(line, *stamp);
      continue;
    }
    if (!header_seen) {
      if (line != kStepColumns) throw std::runtime_error("steps CSV: unexpected header on line " + std::to_string(line_no));
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 19) throw std::runtime_error("steps CSV: wrong field count on line " + std::to_string(line_no));
    TrajectoryStep s;
    s.epoch = std::stoull(f[0]);
    s.episode = std::stoull(f[1]);
    s.step = std::stoi(f[2]);
    s.task_id = std::stoull(f[3]);
    s.exposure = std::stoull(f[4]);
    s.action = std::stoi(f[5]);
    s.reward = std::stod(f[6]);
    s.optimal_expected_reward = std::stod(f[7]);
    s.chosen_expected_reward = std::stod(f[8]);
    s.value_estimate = std::stod(f[9]);
    s.r_gate_mean = std::stod(f[10]);
    s.stage = std::stoi(f[11]);
    s.cued = f[12] == "1";
    s.transition = std::stoi(f[13]);
    s.state_reached = std::stoi(f[14]);
    s.cue_ref = std::stol(f[15]);
    s.position = std::stoi(f[16]);
    s.target = std::stoi(f[17]);
    s.goal_reached = f[18] == "1";
    steps.push_back(s);
  }
  if (!header_seen) throw std::runtime_error("steps CSV: missing header row");
  return steps;
}

}  // namespace emrl
