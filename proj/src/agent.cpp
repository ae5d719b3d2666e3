#include "emrl/agent.hpp"

#include <nlohmann/json.hpp>

#include <istream>
#include <ostream>

namespace emrl {

std::string_view to_string(AgentVariant v) {
  switch (v) {
    case AgentVariant::L2rl: return "l2rl";
    case AgentVariant::L2rlContext: return "l2rl_context";
    case AgentVariant::EpL2rl: return "epl2rl";
  }
  return "unknown";
}

AgentVariant agent_variant_from_string(std::string_view name) {
  for (auto v : {AgentVariant::L2rl, AgentVariant::L2rlContext, AgentVariant::EpL2rl})
    if (to_string(v) == name) return v;
  throw std::invalid_argument("unknown agent variant '" + std::string(name) + "'");
}

int AgentShape::input_dim() const {
  return n_actions + 1 + observation_dim + (variant == AgentVariant::L2rlContext ? context_dim : 0);
}

AgentParams AgentParams::random(const AgentShape& shape, Rng& rng) {
  if (shape.n_actions < 1 || shape.hidden < 1) throw std::invalid_argument("agent needs actions and hidden units");
  AgentParams p;
  p.shape = shape;
  p.lstm = EpLstmParams::random(shape.input_dim(), shape.hidden, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  std::uniform_real_distribution<double> u(-bound, bound);
  // Small policy weights keep the initial policy close to uniform.
  p.heads.policy_w = Matrix::NullaryExpr(shape.n_actions, shape.hidden, [&] { return 0.1 * u(rng); });
  p.heads.policy_b = Vector::Zero(shape.n_actions);
  p.heads.value_w = Vector::NullaryExpr(shape.hidden, [&] { return u(rng); });
  p.heads.value_b = 0.0;
  return p;
}

AgentParams AgentParams::zeros_like(const AgentParams& other) {
  AgentParams p;
  p.shape = other.shape;
  p.lstm = EpLstmParams::zeros(other.lstm.input_size(), other.lstm.hidden_size());
  p.heads.policy_w = Matrix::Zero(other.heads.policy_w.rows(), other.heads.policy_w.cols());
  p.heads.policy_b = Vector::Zero(other.heads.policy_b.size());
  p.heads.value_w = Vector::Zero(other.heads.value_w.size());
  p.heads.value_b = 0.0;
  return p;
}

std::size_t AgentParams::parameter_count() const {
  return lstm.parameter_count() + static_cast<std::size_t>(heads.policy_w.size() + heads.policy_b.size() +
                                                           heads.value_w.size() + 1);
}

Vector AgentParams::flatten() const {
  Vector flat(static_cast<Eigen::Index>(parameter_count()));
  double* out = flat.data();
  lstm.flatten_into(out);
  out += lstm.parameter_count();
  out = std::copy(heads.policy_w.data(), heads.policy_w.data() + heads.policy_w.size(), out);
  out = std::copy(heads.policy_b.data(), heads.policy_b.data() + heads.policy_b.size(), out);
  out = std::copy(heads.value_w.data(), heads.value_w.data() + heads.value_w.size(), out);
  *out = heads.value_b;
  return flat;
}

void AgentParams::assign(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) throw std::invalid_argument("parameter size mismatch");
  const double* in = flat.data();
  lstm.assign_from(in);
  in += lstm.parameter_count();
  std::copy(in, in + heads.policy_w.size(), heads.policy_w.data());
  in += heads.policy_w.size();
  std::copy(in, in + heads.policy_b.size(), heads.policy_b.data());
  in += heads.policy_b.size();
  std::copy(in, in + heads.value_w.size(), heads.value_w.data());
  in += heads.value_w.size();
  heads.value_b = *in;
}

std::uint64_t AgentParams::fingerprint() const {
  const Vector flat = flatten();
  return fnv1a(flat.data(), static_cast<std::size_t>(flat.size()) * sizeof(double));
}

namespace {

nlohmann::json tensor_json(const Matrix& m) {
  return {{"shape", {m.rows(), m.cols()}}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix tensor_from_json(const nlohmann::json& j) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || static_cast<std::size_t>(shape[0] * shape[1]) != data.size())
    throw std::runtime_error("checkpoint tensor has inconsistent shape");
  return Eigen::Map<const Matrix>(data.data(), shape[0], shape[1]);
}

}  // namespace

void AgentParams::save(std::ostream& out, const std::string& config_hash) const {
  nlohmann::json j;
  j["format"] = "emrl-agent";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["shape"] = {{"variant", std::string(to_string(shape.variant))},
                {"n_actions", shape.n_actions},
                {"observation_dim", shape.observation_dim},
                {"context_dim", shape.context_dim},
                {"key_dim", shape.key_dim},
                {"hidden", shape.hidden},
                {"dnd_k", shape.dnd_k},
                {"kernel_delta", shape.kernel_delta},
                {"key_encoding", shape.key_encoding == KeyEncoding::Bipolar ? "bipolar" : "identity"}};
  auto& tensors = j["tensors"];
  for (const auto& [name, m] : lstm.named_tensors()) tensors[name] = tensor_json(m);
  tensors["heads.policy_w"] = tensor_json(heads.policy_w);
  tensors["heads.policy_b"] = tensor_json(heads.policy_b);
  tensors["heads.value_w"] = tensor_json(heads.value_w);
  tensors["heads.value_b"] = tensor_json(Matrix::Constant(1, 1, heads.value_b));
  out << j.dump() << '\n';
}

AgentParams AgentParams::load(std::istream& in) {
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "emrl-agent") throw std::runtime_error("not an emrl agent checkpoint");
  if (j.value("version", 0) != 1) throw std::runtime_error("unsupported checkpoint version");
  AgentParams p;
  const auto& s = j.at("shape");
  p.shape.variant = agent_variant_from_string(s.at("variant").get<std::string>());
  p.shape.n_actions = s.at("n_actions").get<int>();
  p.shape.observation_dim = s.at("observation_dim").get<int>();
  p.shape.context_dim = s.at("context_dim").get<int>();
  p.shape.key_dim = s.at("key_dim").get<int>();
  p.shape.hidden = s.at("hidden").get<int>();
  p.shape.dnd_k = s.at("dnd_k").get<std::size_t>();
  p.shape.kernel_delta = s.at("kernel_delta").get<double>();
  p.shape.key_encoding = s.at("key_encoding").get<std::string>() == "bipolar" ? KeyEncoding::Bipolar
                                                                                : KeyEncoding::Identity;
  std::map<std::string, Matrix> tensors;
  for (const auto& [name, t] : j.at("tensors").items()) tensors[name] = tensor_from_json(t);
  p.lstm = EpLstmParams::from_named_tensors(tensors);
  p.heads.policy_w = tensors.at("heads.policy_w");
  p.heads.policy_b = tensors.at("heads.policy_b").col(0);
  p.heads.value_w = tensors.at("heads.value_w").col(0);
  p.heads.value_b = tensors.at("heads.value_b")(0, 0);
  if (p.lstm.input_size() != p.shape.input_dim() || p.lstm.hidden_size() != p.shape.hidden ||
      p.heads.policy_w.rows() != p.shape.n_actions || p.heads.policy_w.cols() != p.shape.hidden)
    throw std::runtime_error("checkpoint tensors disagree with the recorded agent shape");
  return p;
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  return e / e.sum();
}

Agent::Agent(const AgentParams* params)
    : params_(params),
      state_(EpLstmState::zeros(params->shape.hidden)),
      dnd_(static_cast<std::size_t>(std::max(params->shape.key_dim, 0)), static_cast<std::size_t>(params->shape.hidden),
           params->shape.dnd_k, params->shape.kernel_delta) {}

Vector Agent::build_input(const AgentInput& in) const {
  const AgentShape& s = params_->shape;
  if (in.prev_action_onehot.size() != s.n_actions || in.observation.size() != s.observation_dim)
    throw std::invalid_argument("agent input does not match the agent shape");
  if (!std::isfinite(in.prev_reward)) throw NonFiniteError("agent input: non-finite reward");
  Vector x(s.input_dim());
  x.head(s.n_actions) = in.prev_action_onehot;
  x[s.n_actions] = in.prev_reward;
  x.segment(s.n_actions + 1, s.observation_dim) = in.observation;
  if (s.variant == AgentVariant::L2rlContext) {
    if (in.context.size() != s.context_dim) throw std::invalid_argument("agent input: context width mismatch");
    x.tail(s.context_dim) = in.context;
  }
  return x;
}

Vector Agent::encode_key(const Vector& context) const {
  if (params_->shape.key_encoding == KeyEncoding::Bipolar) return (2.0 * context.array() - 1.0).matrix();
  return context;
}

ActRecord Agent::act(const AgentInput& input, const std::optional<Vector>& query_key, Rng& rng, bool greedy) {
  const AgentParams& p = *params_;
  const Vector x = build_input(input);

  Vector c_ep;
  if (p.shape.variant == AgentVariant::EpL2rl) {
    c_ep = dnd_.read(query_key ? encode_key(*query_key) : Vector::Zero(p.shape.key_dim));
    ++reads_;
  } else {
    c_ep = Vector::Zero(p.shape.hidden);
  }

  auto fr = forward_step(p.lstm, x, state_, c_ep);
  state_ = fr.state;

  ActRecord rec;
  const Vector logits = p.heads.policy_w * state_.h + p.heads.policy_b;
  if (!logits.allFinite()) throw NonFiniteError("policy logits are not finite");
  rec.probs = softmax(logits);
  rec.value = p.heads.value_w.dot(state_.h) + p.heads.value_b;
  if (greedy) {
    Eigen::Index best = 0;
    rec.probs.maxCoeff(&best);
    rec.action = static_cast<int>(best);
  } else {
    const double u = uniform01(rng);
    double acc = 0.0;
    rec.action = static_cast<int>(rec.probs.size()) - 1;
    for (Eigen::Index a = 0; a < rec.probs.size(); ++a) {
      acc += rec.probs[a];
      if (u < acc) {
        rec.action = static_cast<int>(a);
        break;
      }
    }
  }
  rec.log_prob = std::log(rec.probs[rec.action]);
  rec.h = state_.h;
  rec.r_gate = std::move(fr.r_gate);
  rec.cache = std::move(fr.cache);
  return rec;
}

void Agent::write_memory(const std::vector<Vector>& keys) {
  ++write_calls_;
  if (params_->shape.variant != AgentVariant::EpL2rl) return;
  for (const auto& k : keys) dnd_.write(encode_key(k), state_.c);
}

void Agent::end_episode(const std::vector<Vector>& keys) {
  write_memory(keys);
  state_ = EpLstmState::zeros(params_->shape.hidden);
}

void Agent::end_epoch() {
  dnd_.clear();
  state_ = EpLstmState::zeros(params_->shape.hidden);
}

}  // namespace emrl
