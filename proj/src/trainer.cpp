#include "emrl/trainer.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace emrl {

EpochPlan next_epoch_plan(const TaskSetup& task, Rng& rng) {
  if (task.env.kind == EnvKind::TwoStep) return make_two_step_plan(rng);
  EpochOptions o = task.epoch;
  o.kind = task.env.kind;
  return build_epoch(o, rng);
}

std::size_t episodes_per_epoch(const TaskSetup& task) {
  switch (task.env.kind) {
    case EnvKind::TwoStep: return 1;
    case EnvKind::CompositionalBandit: return task.epoch.n_unique_contexts / 2 * task.epoch.duplicates;
    default: return task.epoch.n_unique_contexts * task.epoch.duplicates;
  }
}

AgentShape make_agent_shape(const Environment& env, AgentVariant variant, int hidden, std::size_t dnd_k,
                            double kernel_delta) {
  AgentShape s;
  s.variant = variant;
  s.n_actions = env.n_actions();
  s.observation_dim = env.observation_dim();
  s.context_dim = env.context_input_dim();
  s.key_dim = env.query_dim();
  s.hidden = hidden;
  s.dnd_k = dnd_k;
  s.kernel_delta = kernel_delta;
  const bool barcodes = env.kind() == EnvKind::BarcodeBandit || env.kind() == EnvKind::WaterMaze ||
                        env.kind() == EnvKind::TwoStep;
  s.key_encoding = barcodes ? KeyEncoding::Bipolar : KeyEncoding::Identity;
  return s;
}

EpisodeRollout rollout(Agent& agent, Environment& env, const EpochPlan& plan, std::size_t episode, RunMode mode,
                       Rng& rng, std::size_t epoch_index, bool greedy) {
  const AgentShape& shape = agent.params().shape;
  if (shape.n_actions != env.n_actions() || shape.observation_dim != env.observation_dim())
    throw std::invalid_argument("agent and environment are incompatible");

  env.reset(plan, episode, rng);
  const PlannedEpisode& planned = plan.episodes.at(episode);

  EpisodeRollout out;
  out.task_id = plan.tasks.at(planned.tasks.at(0)).task_id;
  out.exposure = planned.exposures.empty() ? 0 : planned.exposures[0];

  AgentInput input;
  input.prev_action_onehot = Vector::Zero(shape.n_actions);
  double rgate_sum = 0.0;
  int step_in_episode = 0;
  long last_traversal = -1;

  while (!env.done()) {
    input.observation = env.observe().stimulus;
    input.context = env.context_input();
    const auto query = env.query_key(rng);
    ActRecord rec = agent.act(input, query, rng, greedy);
    const StepResult res = env.step(rec.action, rng);
    if (!std::isfinite(res.reward)) throw NonFiniteError("environment returned a non-finite reward");

    TrajectoryStep s;
    s.epoch = epoch_index;
    if (res.info.traversal >= 0) {
      if (res.info.traversal != last_traversal) step_in_episode = 0;
      last_traversal = res.info.traversal;
      s.episode = static_cast<std::size_t>(res.info.traversal);
    } else {
      s.episode = episode;
    }
    s.step = step_in_episode++;
    s.task_id = out.task_id;
    s.exposure = out.exposure;
    s.action = rec.action;
    s.reward = res.reward;
    s.optimal_expected_reward = res.info.optimal_expected_reward;
    s.chosen_expected_reward = res.info.chosen_expected_reward;
    s.value_estimate = rec.value;
    s.r_gate_mean = shape.variant == AgentVariant::EpL2rl ? rec.r_gate.mean() : 0.0;
    s.stage = res.info.stage;
    s.cued = res.info.cued;
    s.transition = res.info.transition;
    s.state_reached = res.info.state_reached;
    s.cue_ref = res.info.cue_ref;
    s.position = res.info.position;
    s.target = res.info.target;
    s.goal_reached = res.info.goal_reached;
    out.steps.push_back(s);

    rgate_sum += s.r_gate_mean;
    out.rewards.push_back(res.reward);
    out.values.push_back(rec.value);
    out.episode_return += res.reward;

    input.prev_action_onehot.setZero();
    input.prev_action_onehot[rec.action] = 1.0;
    input.prev_reward = res.reward;
    if (mode == RunMode::Train) out.records.push_back(std::move(rec));

    if (res.write_point && !res.done) agent.write_memory(env.write_keys());
  }
  if (!out.steps.empty()) out.mean_rgate = rgate_sum / static_cast<double>(out.steps.size());
  return out;
}

Advantages compute_advantages(const std::vector<double>& rewards, const std::vector<double>& values, double gamma) {
  if (rewards.size() != values.size()) throw std::invalid_argument("advantages: rewards and values differ in length");
  Advantages out;
  out.returns.resize(rewards.size());
  out.advantages.resize(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    running = rewards[t] + gamma * running;
    out.returns[t] = running;
    out.advantages[t] = running - values[t];
  }
  return out;
}

LossStats accumulate_gradients(const AgentParams& params, const EpisodeRollout& r, const LossWeights& w, double weight,
                               AgentParams& grads) {
  if (r.records.size() != r.rewards.size()) throw std::invalid_argument("rollout was not recorded in train mode");
  const auto adv = compute_advantages(r.rewards, r.values, w.gamma);
  const int hidden = params.shape.hidden;
  const int n_actions = params.shape.n_actions;

  LossStats stats;
  Vector carry_h = Vector::Zero(hidden);
  Vector carry_c = Vector::Zero(hidden);
  Vector dz(n_actions);
  for (std::size_t t = r.records.size(); t-- > 0;) {
    const ActRecord& rec = r.records[t];
    const Vector log_pi = rec.probs.array().max(1e-300).log();
    const double entropy = -rec.probs.dot(log_pi);
    const double a = adv.advantages[t];
    const double err = adv.returns[t] - rec.value;

    stats.policy_loss += -a * rec.log_prob;
    stats.value_loss += err * err;
    stats.entropy += entropy;

    dz = a * rec.probs;
    dz[rec.action] -= a;
    dz += w.entropy_coef * (rec.probs.array() * (log_pi.array() + entropy)).matrix();
    dz *= weight;
    const double dv = weight * -2.0 * w.value_coef * err;

    grads.heads.policy_w.noalias() += dz * rec.h.transpose();
    grads.heads.policy_b += dz;
    grads.heads.value_w += dv * rec.h;
    grads.heads.value_b += dv;

    Vector dh = params.heads.policy_w.transpose() * dz;
    dh += dv * params.heads.value_w;
    dh += carry_h;
    auto g = backward_step(params.lstm, rec.cache, dh, carry_c, grads.lstm);
    carry_h = std::move(g.grad_prev.h);
    carry_c = std::move(g.grad_prev.c);
  }
  return stats;
}

double clip_global_norm(Vector& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm && norm > 0.0) grad *= max_norm / norm;
  return norm;
}

Adam::Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::step(Vector& params, const Vector& grad) {
  if (m_.size() != params.size()) {
    m_ = Vector::Zero(params.size());
    v_ = Vector::Zero(params.size());
    t_ = 0;
  }
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

LossStats a2c_update(AgentParams& params, const std::vector<const EpisodeRollout*>& batch, const TrainConfig& config,
                     double entropy_coef, Adam& optimizer, std::vector<LossStats>* per_rollout) {
  if (batch.empty()) throw std::invalid_argument("a2c_update needs at least one rollout");
  AgentParams grads = AgentParams::zeros_like(params);
  const LossWeights w{config.gamma, config.value_coef, entropy_coef};
  const double weight = 1.0 / static_cast<double>(batch.size());
  LossStats total;
  if (per_rollout) per_rollout->clear();
  for (const EpisodeRollout* r : batch) {
    const auto s = accumulate_gradients(params, *r, w, weight, grads);
    total.policy_loss += weight * s.policy_loss;
    total.value_loss += weight * s.value_loss;
    total.entropy += weight * s.entropy;
    if (per_rollout) per_rollout->push_back(s);
  }
  Vector g = grads.flatten();
  total.grad_norm = g.norm();
  if (!std::isfinite(total.grad_norm) || total.grad_norm > config.hard_cap) {
    total.skipped = true;
    return total;
  }
  clip_global_norm(g, config.clip_norm);
  total.applied_norm = g.norm();
  Vector flat = params.flatten();
  optimizer.step(flat, g);
  params.assign(flat);
  return total;
}

const char* const kMetricsColumns =
    "worker,epoch,episode,task_id,exposure,return,policy_loss,value_loss,entropy,mean_rgate";

void write_metrics_header(std::ostream& out, const FileStamp& stamp) {
  out << format_stamp(stamp) << '\n' << kMetricsColumns << '\n';
}

void write_metrics_row(std::ostream& out, const EpisodeMetrics& m) {
  out << m.worker << ',' << m.epoch << ',' << m.episode << ',' << m.task_id << ',' << m.exposure << ','
      << format_number(m.episode_return) << ',' << format_number(m.policy_loss) << ','
      << format_number(m.value_loss) << ',' << format_number(m.entropy) << ',' << format_number(m.mean_rgate)
      << '\n';
}

std::vector<EpisodeMetrics> read_metrics_csv(std::istream& in, FileStamp* stamp) {
  std::vector<EpisodeMetrics> rows;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (stamp) parse_stamp(line, *stamp);
      continue;
    }
    if (!header) {
      if (line != kMetricsColumns) throw std::runtime_error("metrics CSV: unexpected header");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw std::runtime_error("metrics CSV: wrong field count");
    EpisodeMetrics m;
    m.worker = std::stoull(f[0]);
    m.epoch = std::stoull(f[1]);
    m.episode = std::stoull(f[2]);
    m.task_id = std::stoull(f[3]);
    m.exposure = std::stoull(f[4]);
    m.episode_return = std::stod(f[5]);
    m.policy_loss = std::stod(f[6]);
    m.value_loss = std::stod(f[7]);
    m.entropy = std::stod(f[8]);
    m.mean_rgate = std::stod(f[9]);
    rows.push_back(m);
  }
  if (!header) throw std::runtime_error("metrics CSV: missing header row");
  return rows;
}

namespace {

EpisodeMetrics metrics_of(const EpisodeRollout& r, std::size_t worker, std::size_t epoch, std::size_t episode,
                          const LossStats* loss) {
  EpisodeMetrics m;
  m.worker = worker;
  m.epoch = epoch;
  m.episode = episode;
  m.task_id = r.task_id;
  m.exposure = r.exposure;
  m.episode_return = r.episode_return;
  m.mean_rgate = r.mean_rgate;
  if (loss) {
    m.policy_loss = loss->policy_loss;
    m.value_loss = loss->value_loss;
    m.entropy = loss->entropy;
  }
  return m;
}

}  // namespace

EpochResult run_epoch(Agent& agent, Environment& env, const EpochPlan& plan, RunMode mode, Rng& rng,
                      std::size_t epoch_index, Learner* learner, bool greedy) {
  if (mode == RunMode::Train && (!learner || learner->params != &agent.params()))
    throw std::invalid_argument("training epochs need a learner that owns the agent's parameters");
  const std::uint64_t before = agent.params().fingerprint();
  EpochResult out;
  for (std::size_t e = 0; e < plan.episodes.size(); ++e) {
    EpisodeRollout r = rollout(agent, env, plan, e, mode, rng, epoch_index, greedy);
    LossStats loss;
    std::vector<LossStats> per;
    if (mode == RunMode::Train) {
      a2c_update(*learner->params, {&r}, *learner->config, learner->entropy_coef, *learner->optimizer, &per);
      loss = per.front();
    }
    agent.end_episode(env.write_keys());
    out.metrics.push_back(metrics_of(r, 0, epoch_index, e, mode == RunMode::Train ? &loss : nullptr));
    out.steps.insert(out.steps.end(), r.steps.begin(), r.steps.end());
  }
  agent.end_epoch();
  if (mode == RunMode::Eval && agent.params().fingerprint() != before)
    throw std::logic_error("parameters changed during a frozen evaluation epoch");
  return out;
}

namespace {

Rng worker_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x6d72u};
  return Rng(seq);
}

struct Worker {
  std::unique_ptr<Environment> env;
  std::unique_ptr<Agent> agent;
  Rng rng;
  EpochPlan plan;
  EpisodeRollout last;
};

}  // namespace

AgentParams initial_agent_params(const TaskSetup& task, AgentVariant variant, int hidden, std::uint64_t seed,
                                 std::size_t dnd_k, double kernel_delta) {
  const auto env = make_environment(task.env);
  Rng rng = worker_rng(seed, 0xfeedULL);
  return AgentParams::random(make_agent_shape(*env, variant, hidden, dnd_k, kernel_delta), rng);
}

Trainer::Trainer(TaskSetup task, AgentVariant variant, int hidden, TrainConfig config)
    : task_(std::move(task)), config_(config), params_(initial_agent_params(task_, variant, hidden, config.seed)) {}

Trainer::Trainer(TaskSetup task, AgentParams params, TrainConfig config)
    : task_(std::move(task)), config_(config), params_(std::move(params)) {}

void Trainer::train(const EpisodeCallback& on_episode, const EvalCallback& on_eval) {
  const std::size_t n_workers = std::max<std::size_t>(1, config_.batch_size);
  std::vector<Worker> workers(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) {
    workers[w].env = make_environment(task_.env);
    workers[w].agent = std::make_unique<Agent>(&params_);
    workers[w].rng = worker_rng(config_.seed, w + 1);
  }
  Adam optimizer(config_.learning_rate, config_.adam_beta1, config_.adam_beta2, config_.adam_eps);
  const std::size_t per_epoch = episodes_per_epoch(task_);
  const double total_updates = static_cast<double>(config_.train_epochs * per_epoch);
  std::size_t update = 0;
  std::vector<const EpisodeRollout*> batch(n_workers);
  std::vector<LossStats> per;

  for (std::size_t epoch = 0; epoch < config_.train_epochs; ++epoch) {
    for (auto& wk : workers) wk.plan = next_epoch_plan(task_, wk.rng);
    const std::size_t n_episodes = workers[0].plan.episodes.size();
    for (std::size_t e = 0; e < n_episodes; ++e) {
      const double progress = total_updates > 0 ? static_cast<double>(update) / total_updates : 0.0;
      const double coef = config_.entropy_coef + (config_.entropy_final - config_.entropy_coef) * progress;
      parallel_for(n_workers, config_.threads, [&](std::size_t w) {
        auto& wk = workers[w];
        wk.last = rollout(*wk.agent, *wk.env, wk.plan, e, RunMode::Train, wk.rng, epoch);
      });
      for (std::size_t w = 0; w < n_workers; ++w) batch[w] = &workers[w].last;
      const LossStats stats = a2c_update(params_, batch, config_, coef, optimizer, &per);
      if (stats.skipped) ++skipped_;
      for (std::size_t w = 0; w < n_workers; ++w) {
        auto& wk = workers[w];
        wk.agent->end_episode(wk.env->write_keys());
        if (on_episode) on_episode(metrics_of(wk.last, w, epoch, e, &per[w]));
        wk.last.records.clear();
      }
      ++update;
    }
    for (auto& wk : workers) wk.agent->end_epoch();
    if (config_.eval_every > 0 && on_eval && (epoch + 1) % config_.eval_every == 0)
      on_eval(epoch + 1, evaluate(config_.eval_epochs, config_.seed + 7919 * (epoch + 1)));
  }
}

EvalResult Trainer::evaluate(std::size_t epochs, std::uint64_t seed, bool greedy) const {
  EvalResult out;
  out.fingerprint_before = params_.fingerprint();
  const auto env = make_environment(task_.env);
  Agent agent(&params_);
  Rng rng = worker_rng(seed, 0xe7a1ULL);
  double total = 0.0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const EpochPlan plan = next_epoch_plan(task_, rng);
    auto res = run_epoch(agent, *env, plan, RunMode::Eval, rng, epoch, nullptr, greedy);
    for (const auto& m : res.metrics) total += m.episode_return;
    out.steps.insert(out.steps.end(), res.steps.begin(), res.steps.end());
    out.metrics.insert(out.metrics.end(), res.metrics.begin(), res.metrics.end());
  }
  if (!out.metrics.empty()) out.mean_return = total / static_cast<double>(out.metrics.size());
  out.fingerprint_after = params_.fingerprint();
  return out;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::min(std::max<std::size_t>(threads, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace emrl
