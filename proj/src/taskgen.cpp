#include "emrl/taskgen.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

namespace emrl {

std::string_view to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::BarcodeBandit: return "barcode_bandit";
    case EnvKind::ClassBandit: return "class_bandit";
    case EnvKind::CompositionalBandit: return "compositional_bandit";
    case EnvKind::WaterMaze: return "water_maze";
    case EnvKind::TwoStep: return "two_step";
  }
  return "unknown";
}

EnvKind env_kind_from_string(std::string_view name) {
  for (auto k : {EnvKind::BarcodeBandit, EnvKind::ClassBandit, EnvKind::CompositionalBandit,
                 EnvKind::WaterMaze, EnvKind::TwoStep}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown experiment kind '" + std::string(name) + "'");
}

UrnState::UrnState(double concentration) : alpha(concentration) {
  if (!(alpha > 0.0)) throw std::invalid_argument("urn concentration must be positive");
}

double fresh_draw_probability(const UrnState& state) {
  return state.alpha / (state.alpha + static_cast<double>(state.n));
}

UrnDraw urn_draw(UrnState& state, const TaskSampler& base, Rng& rng) {
  if (!(state.alpha > 0.0)) throw std::invalid_argument("urn concentration must be positive");
  UrnDraw out;
  out.fresh = state.n == 0 || uniform01(rng) < fresh_draw_probability(state);
  if (out.fresh) {
    out.task = base(rng);
  } else {
    out.task = state.drawn[uniform_index(state.drawn.size(), rng)];
  }
  state.drawn.push_back(out.task);
  state.n = state.drawn.size();
  return out;
}

Vector sample_barcode(int length, Rng& rng) {
  if (length < 1) throw std::invalid_argument("barcode length must be >= 1");
  Vector code(length);
  std::bernoulli_distribution bit(0.5);
  for (int i = 0; i < length; ++i) code[i] = bit(rng) ? 1.0 : 0.0;
  return code;
}

std::vector<Vector> sample_unique_barcodes(int length, std::size_t count, Rng& rng) {
  if (length < 1) throw std::invalid_argument("barcode length must be >= 1");
  if (length < 63 && (std::uint64_t{1} << length) < count) {
    throw std::invalid_argument("cannot draw " + std::to_string(count) + " unique barcodes of length " +
                                std::to_string(length));
  }
  std::set<std::vector<double>> seen;
  std::vector<Vector> out;
  out.reserve(count);
  while (out.size() < count) {
    Vector code = sample_barcode(length, rng);
    std::vector<double> key(code.data(), code.data() + code.size());
    if (seen.insert(std::move(key)).second) out.push_back(std::move(code));
  }
  return out;
}

Vector random_unit_vector(int dim, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("dimension must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
    const double n = v.norm();
    if (n > 0.0) return v / n;
  }
}

Vector sample_class_instance(const Vector& prototype, double noise_scale, Rng& rng) {
  if (!(noise_scale >= 0.0)) throw std::invalid_argument("noise scale must be >= 0");
  if (std::abs(prototype.norm() - 1.0) > 1e-9) throw std::invalid_argument("class prototype must have unit norm");
  if (noise_scale == 0.0) return prototype;
  std::normal_distribution<double> normal(0.0, noise_scale);
  for (;;) {
    Vector v = prototype;
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += normal(rng);
    const double n = v.norm();
    if (n > 0.0) return v / n;
  }
}

namespace {

bool uses_class_contexts(EnvKind kind) {
  return kind == EnvKind::ClassBandit || kind == EnvKind::CompositionalBandit;
}

std::vector<Vector> make_contexts(const EpochOptions& o, std::size_t count, Rng& rng) {
  if (uses_class_contexts(o.kind)) {
    std::vector<Vector> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(random_unit_vector(o.class_dim, rng));
    return out;
  }
  return sample_unique_barcodes(o.barcode_length, count, rng);
}

Vector shown_context(const EpochOptions& o, const Vector& base, Rng& rng) {
  return uses_class_contexts(o.kind) ? sample_class_instance(base, o.class_noise, rng) : base;
}

std::vector<std::size_t> shuffled_bag(std::size_t first, std::size_t count, std::size_t duplicates, Rng& rng) {
  std::vector<std::size_t> bag;
  bag.reserve(count * duplicates);
  for (std::size_t t = first; t < first + count; ++t)
    for (std::size_t d = 0; d < duplicates; ++d) bag.push_back(t);
  std::shuffle(bag.begin(), bag.end(), rng);
  return bag;
}

}  // namespace

EpochPlan build_epoch(const EpochOptions& o, Rng& rng) {
  if (o.kind == EnvKind::TwoStep) throw std::invalid_argument("two-step epochs are built by the two-step environment");
  if (o.n_unique_contexts == 0 || o.duplicates == 0 || o.n_positions == 0)
    throw std::invalid_argument("epoch sizes must be positive");

  EpochPlan plan;
  plan.kind = o.kind;
  plan.mapping_seed = rng();
  Rng mrng(plan.mapping_seed);

  if (o.kind == EnvKind::CompositionalBandit) {
    if (o.n_unique_contexts < 2 || o.n_unique_contexts % 2 != 0)
      throw std::invalid_argument("compositional epochs need an even number (>= 2) of contexts");
    const std::size_t half = o.n_unique_contexts / 2;
    const auto contexts = make_contexts(o, o.n_unique_contexts, mrng);
    for (std::size_t i = 0; i < o.n_unique_contexts; ++i) {
      TaskSpec t;
      t.task_id = i;
      t.context = contexts[i];
      t.mdp.arm_probs = {i < half ? o.high_prob : o.low_prob};
      plan.tasks.push_back(std::move(t));
      plan.duplicates.push_back(o.duplicates);
    }
    const auto high = shuffled_bag(0, half, o.duplicates, mrng);
    const auto low = shuffled_bag(half, half, o.duplicates, mrng);
    std::vector<std::size_t> seen(plan.tasks.size(), 0);
    for (std::size_t e = 0; e < high.size(); ++e) {
      PlannedEpisode ep;
      for (std::size_t idx : {high[e], low[e]}) {
        ep.tasks.push_back(idx);
        ep.contexts.push_back(shown_context(o, plan.tasks[idx].context, mrng));
        ep.exposures.push_back(seen[idx]++);
      }
      plan.episodes.push_back(std::move(ep));
    }
    return plan;
  }

  if (o.n_unique_contexts < o.n_positions)
    throw std::invalid_argument("need at least as many contexts (" + std::to_string(o.n_unique_contexts) +
                                ") as rewarding positions (" + std::to_string(o.n_positions) + ")");

  // Cover every position once, fill the rest uniformly, then shuffle the pairing.
  std::vector<int> positions;
  for (std::size_t p = 0; p < o.n_positions; ++p) positions.push_back(static_cast<int>(p));
  while (positions.size() < o.n_unique_contexts)
    positions.push_back(static_cast<int>(uniform_index(o.n_positions, mrng)));
  std::shuffle(positions.begin(), positions.end(), mrng);

  const auto contexts = make_contexts(o, o.n_unique_contexts, mrng);
  const bool bandit = o.kind != EnvKind::WaterMaze;
  for (std::size_t i = 0; i < o.n_unique_contexts; ++i) {
    TaskSpec t;
    t.task_id = i;
    t.context = contexts[i];
    t.mdp.target = positions[i];
    if (bandit) {
      t.mdp.arm_probs.assign(o.n_positions, o.low_prob);
      t.mdp.arm_probs[positions[i]] = o.high_prob;
    }
    plan.tasks.push_back(std::move(t));
    plan.duplicates.push_back(o.duplicates);
  }

  std::vector<std::size_t> seen(plan.tasks.size(), 0);
  for (std::size_t idx : shuffled_bag(0, plan.tasks.size(), o.duplicates, mrng)) {
    PlannedEpisode ep;
    ep.tasks.push_back(idx);
    ep.contexts.push_back(shown_context(o, plan.tasks[idx].context, mrng));
    ep.exposures.push_back(seen[idx]++);
    plan.episodes.push_back(std::move(ep));
  }
  return plan;
}

namespace {

nlohmann::json vec_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void save_epoch_plan(const EpochPlan& plan, std::ostream& out) {
  nlohmann::json j;
  j["format"] = "emrl-epoch-plan";
  j["version"] = 1;
  j["kind"] = std::string(to_string(plan.kind));
  j["mapping_seed"] = plan.mapping_seed;
  auto& tasks = j["tasks"] = nlohmann::json::array();
  for (std::size_t i = 0; i < plan.tasks.size(); ++i) {
    const auto& t = plan.tasks[i];
    tasks.push_back({{"task_id", t.task_id},
                     {"context", vec_to_json(t.context)},
                     {"target", t.mdp.target},
                     {"arm_probs", t.mdp.arm_probs},
                     {"duplicates", plan.duplicates[i]}});
  }
  auto& eps = j["episodes"] = nlohmann::json::array();
  for (std::size_t e = 0; e < plan.episodes.size(); ++e) {
    const auto& ep = plan.episodes[e];
    nlohmann::json ctx = nlohmann::json::array();
    for (const auto& c : ep.contexts) ctx.push_back(vec_to_json(c));
    eps.push_back({{"order", e}, {"tasks", ep.tasks}, {"exposures", ep.exposures}, {"contexts", ctx}});
  }
  out << j.dump(1) << '\n';
}

EpochPlan load_epoch_plan(std::istream& in) {
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "emrl-epoch-plan" || j.value("version", 0) != 1)
    throw std::runtime_error("not an emrl epoch plan (version 1)");
  EpochPlan plan;
  plan.kind = env_kind_from_string(j.at("kind").get<std::string>());
  plan.mapping_seed = j.at("mapping_seed").get<std::uint64_t>();
  for (const auto& t : j.at("tasks")) {
    TaskSpec spec;
    spec.task_id = t.at("task_id").get<std::size_t>();
    spec.context = vec_from_json(t.at("context"));
    spec.mdp.target = t.at("target").get<int>();
    spec.mdp.arm_probs = t.at("arm_probs").get<std::vector<double>>();
    plan.tasks.push_back(std::move(spec));
    plan.duplicates.push_back(t.at("duplicates").get<std::size_t>());
  }
  for (const auto& e : j.at("episodes")) {
    PlannedEpisode ep;
    ep.tasks = e.at("tasks").get<std::vector<std::size_t>>();
    ep.exposures = e.at("exposures").get<std::vector<std::size_t>>();
    for (const auto& c : e.at("contexts")) ep.contexts.push_back(vec_from_json(c));
    for (std::size_t idx : ep.tasks)
      if (idx >= plan.tasks.size()) throw std::runtime_error("epoch plan references unknown task");
    plan.episodes.push_back(std::move(ep));
  }
  return plan;
}

}  // namespace emrl
