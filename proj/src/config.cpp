#include "emrl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

namespace emrl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw std::invalid_argument("not a number: '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("not a boolean: '" + text + "'");
}

std::string show(double v) { return format_number(v); }
std::string show(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string show(T v) {
  return std::to_string(v);
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
  bool hashed = true;
};

#define EMRL_FIELD(section, key, member, type)                                                            \
  Field {                                                                                                 \
    section, key, [](ExperimentConfig& c, const std::string& v) { c.member = parse_number<type>(v); },    \
        [](const ExperimentConfig& c) { return show(static_cast<type>(c.member)); }                      \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"experiment", "name", [](ExperimentConfig& c, const std::string& v) { c.preset = v; },
                 [](const ExperimentConfig& c) { return c.preset; }});
    f.push_back({"experiment", "kind",
                 [](ExperimentConfig& c, const std::string& v) { c.task.env.kind = env_kind_from_string(v); },
                 [](const ExperimentConfig& c) { return std::string(to_string(c.task.env.kind)); }});
    f.push_back({"experiment", "variant",
                 [](ExperimentConfig& c, const std::string& v) { c.variant = agent_variant_from_string(v); },
                 [](const ExperimentConfig& c) { return std::string(to_string(c.variant)); }});
    f.push_back({"experiment", "seed",
                 [](ExperimentConfig& c, const std::string& v) { c.train.seed = parse_number<std::uint64_t>(v); },
                 [](const ExperimentConfig& c) { return show(c.train.seed); }, false});
    f.push_back({"experiment", "out", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
                 [](const ExperimentConfig& c) { return c.out_dir; }, false});

    f.push_back(EMRL_FIELD("task", "arms", task.env.n_arms, int));
    f.push_back(EMRL_FIELD("task", "trials", task.env.trials, int));
    f.push_back(EMRL_FIELD("task", "barcode_length", task.env.barcode_length, int));
    f.push_back(EMRL_FIELD("task", "class_dim", task.env.class_dim, int));
    f.push_back(EMRL_FIELD("task", "class_noise", task.epoch.class_noise, double));
    f.push_back(EMRL_FIELD("task", "unique_contexts", task.epoch.n_unique_contexts, std::size_t));
    f.push_back(EMRL_FIELD("task", "duplicates", task.epoch.duplicates, std::size_t));
    f.push_back(EMRL_FIELD("task", "high_prob", task.epoch.high_prob, double));
    f.push_back(EMRL_FIELD("task", "low_prob", task.epoch.low_prob, double));
    f.push_back(EMRL_FIELD("task", "maze_horizon", task.env.maze_horizon, int));
    f.push_back(EMRL_FIELD("task", "traversals", task.env.twostep_traversals, int));
    f.push_back(EMRL_FIELD("task", "cued_from", task.env.twostep_cued_from, int));
    f.push_back(EMRL_FIELD("task", "common_prob", task.env.common_prob, double));
    f.push_back(EMRL_FIELD("task", "reversal_prob", task.env.reversal_prob, double));

    f.push_back(EMRL_FIELD("agent", "hidden", hidden, int));
    f.push_back(EMRL_FIELD("agent", "dnd_k", dnd_k, std::size_t));
    f.push_back(EMRL_FIELD("agent", "kernel_delta", kernel_delta, double));

    f.push_back(EMRL_FIELD("train", "epochs", train.train_epochs, std::size_t));
    f.push_back(EMRL_FIELD("train", "workers", train.batch_size, std::size_t));
    f.push_back({"train", "threads",
                 [](ExperimentConfig& c, const std::string& v) { c.train.threads = parse_number<std::size_t>(v); },
                 [](const ExperimentConfig& c) { return show(c.train.threads); }, false});
    f.push_back(EMRL_FIELD("train", "learning_rate", train.learning_rate, double));
    f.push_back(EMRL_FIELD("train", "gamma", train.gamma, double));
    f.push_back(EMRL_FIELD("train", "value_coef", train.value_coef, double));
    f.push_back(EMRL_FIELD("train", "entropy_coef", train.entropy_coef, double));
    f.push_back(EMRL_FIELD("train", "entropy_final", train.entropy_final, double));
    f.push_back(EMRL_FIELD("train", "clip_norm", train.clip_norm, double));
    f.push_back(EMRL_FIELD("train", "hard_cap", train.hard_cap, double));
    f.push_back(EMRL_FIELD("train", "adam_beta1", train.adam_beta1, double));
    f.push_back(EMRL_FIELD("train", "adam_beta2", train.adam_beta2, double));
    f.push_back(EMRL_FIELD("train", "adam_eps", train.adam_eps, double));
    f.push_back(EMRL_FIELD("train", "eval_every", train.eval_every, std::size_t));

    f.push_back(EMRL_FIELD("eval", "epochs", eval_epochs, std::size_t));
    f.push_back({"eval", "greedy", [](ExperimentConfig& c, const std::string& v) { c.eval_greedy = parse_bool(v); },
                 [](const ExperimentConfig& c) { return show(c.eval_greedy); }});
    return f;
  }();
  return table;
}

#undef EMRL_FIELD

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

}  // namespace

void set_config_value(ExperimentConfig& config, const std::string& dotted_key, const std::string& value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos) throw ConfigError("config key must look like section.key: '" + dotted_key + "'");
  const Field* f = find_field(dotted_key.substr(0, dot), dotted_key.substr(dot + 1));
  if (!f) throw ConfigError("unknown config key '" + dotted_key + "'");
  try {
    f->set(config, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("bad value for '" + dotted_key + "': " + e.what());
  }
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      const bool known = std::any_of(fields().begin(), fields().end(),
                                     [&](const Field& f) { return f.section == section; });
      if (!known) throw ConfigError(where + "unknown section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* f = find_field(section, key);
    if (!f) throw ConfigError(where + "unknown key '" + key + "' in section [" + section + "]");
    try {
      f->set(base, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + "bad value for '" + section + "." + key + "': " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return parse_config(in, std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

namespace {

std::string serialize(const ExperimentConfig& config, bool hashed_only) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (hashed_only && !f.hashed) continue;
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
  return out.str();
}

}  // namespace

std::string serialize_config(const ExperimentConfig& config) { return serialize(config, false); }

std::string config_hash(const ExperimentConfig& config) { return hex64(fnv1a(serialize(config, true))); }

void finalize_config(ExperimentConfig& c) {
  auto& env = c.task.env;
  auto& ep = c.task.epoch;
  ep.kind = env.kind;
  ep.barcode_length = env.barcode_length;
  ep.class_dim = env.class_dim;
  switch (env.kind) {
    case EnvKind::BarcodeBandit:
    case EnvKind::ClassBandit: ep.n_positions = static_cast<std::size_t>(env.n_arms); break;
    case EnvKind::CompositionalBandit:
      env.n_arms = 2;
      ep.n_positions = 2;
      break;
    case EnvKind::WaterMaze: ep.n_positions = kMazeCells; break;
    case EnvKind::TwoStep: ep.n_positions = 2; break;
  }
  const auto fail = [](const std::string& m) { throw ConfigError("invalid config: " + m); };
  if (env.n_arms < 2) fail("task.arms must be at least 2");
  if (env.trials < 1) fail("task.trials must be positive");
  if (env.barcode_length < 1 || env.barcode_length > 62) fail("task.barcode_length must be in [1, 62]");
  if (c.hidden < 1) fail("agent.hidden must be positive");
  if (c.dnd_k < 1) fail("agent.dnd_k must be positive");
  if (!(c.kernel_delta > 0)) fail("agent.kernel_delta must be positive");
  if (!(c.train.learning_rate > 0)) fail("train.learning_rate must be positive");
  if (c.train.gamma < 0 || c.train.gamma > 1) fail("train.gamma must be in [0, 1]");
  if (c.train.batch_size < 1) fail("train.workers must be positive");
  if (c.train.threads < 1) fail("train.threads must be positive");
  if (ep.high_prob < 0 || ep.high_prob > 1 || ep.low_prob < 0 || ep.low_prob > 1) fail("reward probabilities must lie in [0, 1]");
  if (env.kind != EnvKind::TwoStep) {
    if (ep.n_unique_contexts < 1 || ep.duplicates < 1) fail("task.unique_contexts and task.duplicates must be positive");
    if (env.kind != EnvKind::CompositionalBandit && ep.n_unique_contexts < ep.n_positions)
      fail("task.unique_contexts must cover every rewarding position");
  }
  if (env.kind == EnvKind::CompositionalBandit && ep.n_unique_contexts % 2 != 0)
    fail("task.unique_contexts must be even for the compositional task");
  if (env.kind == EnvKind::TwoStep && (env.twostep_cued_from < 1 || env.twostep_cued_from > env.twostep_traversals))
    fail("task.cued_from must lie in [1, task.traversals]");
  c.train.eval_epochs = c.eval_epochs;
}

std::vector<std::string> preset_names() {
  return {"barcode", "class_bandit", "compositional", "maze", "two_step", "barcode_desk", "maze_desk", "two_step_desk"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  c.out_dir = "runs/" + name;
  auto& env = c.task.env;
  auto& ep = c.task.epoch;
  if (name == "barcode" || name == "class_bandit") {
    env.kind = name == "barcode" ? EnvKind::BarcodeBandit : EnvKind::ClassBandit;
    env.n_arms = 10;
    env.trials = 10;
    env.barcode_length = 10;
    ep.n_unique_contexts = 10;
    ep.duplicates = 10;
    c.train.gamma = 0.9;
  } else if (name == "compositional") {
    env.kind = EnvKind::CompositionalBandit;
    env.n_arms = 2;
    env.trials = 10;
    ep.n_unique_contexts = 400;
    ep.duplicates = 5;
    c.train.gamma = 0.9;
  } else if (name == "maze") {
    env.kind = EnvKind::WaterMaze;
    env.barcode_length = 10;
    env.maze_horizon = kMazeHorizon;
    ep.n_unique_contexts = 16;
    ep.duplicates = 10;
    c.train.gamma = 0.99;
  } else if (name == "two_step") {
    env.kind = EnvKind::TwoStep;
    env.twostep_traversals = 100;
    env.twostep_cued_from = 50;
    env.barcode_length = 10;
    c.train.gamma = 0.5;
  } else if (name == "barcode_desk") {
    env.kind = EnvKind::BarcodeBandit;
    env.n_arms = 5;
    env.trials = 10;
    env.barcode_length = 8;
    ep.n_unique_contexts = 6;
    ep.duplicates = 6;
    c.train.gamma = 0.9;
    c.train.train_epochs = 2000;
    c.eval_epochs = 20;
  } else if (name == "maze_desk") {
    env.kind = EnvKind::WaterMaze;
    env.barcode_length = 8;
    env.maze_horizon = kMazeHorizon;
    ep.n_unique_contexts = 16;
    ep.duplicates = 4;
    c.train.gamma = 0.99;
    c.train.train_epochs = 1500;
    c.eval_epochs = 20;
  } else if (name == "two_step_desk") {
    env.kind = EnvKind::TwoStep;
    env.twostep_traversals = 40;
    env.twostep_cued_from = 20;
    env.barcode_length = 10;
    c.train.gamma = 0.5;
    c.train.train_epochs = 10000;
    c.eval_epochs = 50;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  finalize_config(c);
  return c;
}

}  // namespace emrl
