#pragma once

// Synchronous batched advantage actor-critic. Each worker owns an agent (its
// own recurrent state and DND), an environment and an epoch stream; the
// learner averages the workers' episode gradients and takes one Adam step.

#include "emrl/agent.hpp"
#include "emrl/envs.hpp"
#include "emrl/taskgen.hpp"
#include "emrl/trajectory.hpp"

#include <functional>
#include <iosfwd>
#include <memory>

namespace emrl {

struct TrainConfig {
  double learning_rate = 1e-3;
  double gamma = 0.9;
  double value_coef = 0.5;
  double entropy_coef = 0.05;
  double entropy_final = 0.0;  // linear anneal target
  std::size_t batch_size = 1;  // parallel workers
  double clip_norm = 5.0;
  double hard_cap = 1e6;       // updates with a larger gradient norm are skipped
  std::size_t train_epochs = 100;  // epochs per worker
  std::size_t eval_every = 0;      // epochs between evaluations, 0 = never
  std::size_t eval_epochs = 10;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t threads = 1;
};

struct TaskSetup {
  EnvOptions env;
  EpochOptions epoch;
};

EpochPlan next_epoch_plan(const TaskSetup& task, Rng& rng);
std::size_t episodes_per_epoch(const TaskSetup& task);

AgentShape make_agent_shape(const Environment& env, AgentVariant variant, int hidden, std::size_t dnd_k = 1,
                            double kernel_delta = Dnd::kDefaultKernelDelta);

/// Freshly initialized parameters for a task, seeded from `seed`.
AgentParams initial_agent_params(const TaskSetup& task, AgentVariant variant, int hidden, std::uint64_t seed,
                                 std::size_t dnd_k = 1, double kernel_delta = Dnd::kDefaultKernelDelta);

enum class RunMode { Train, Eval };

struct EpisodeRollout {
  std::vector<TrajectoryStep> steps;
  std::vector<ActRecord> records;  // kept in train mode only
  std::vector<double> rewards;
  std::vector<double> values;
  double episode_return = 0.0;
  std::size_t task_id = 0;
  std::size_t exposure = 0;
  double mean_rgate = 0.0;
};

/// Runs one planned episode. Mid-episode write points (two-step traversals)
/// are stored here; the end-of-episode write is left to end_episode.
EpisodeRollout rollout(Agent& agent, Environment& env, const EpochPlan& plan, std::size_t episode, RunMode mode,
                       Rng& rng, std::size_t epoch_index = 0, bool greedy = false);

struct Advantages {
  std::vector<double> returns;
  std::vector<double> advantages;
};

/// Discounted returns computed backward from the terminal step, no bootstrap.
Advantages compute_advantages(const std::vector<double>& rewards, const std::vector<double>& values, double gamma);

struct LossStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;     // before clipping
  double applied_norm = 0.0;  // after clipping
  bool skipped = false;
};

struct LossWeights {
  double gamma = 0.9;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
};

/// loss = -sum A_t log pi(a_t) + c_v sum (R_t - V_t)^2 - c_e sum H(pi_t).
/// Adds weight * dloss/dparams into grads; advantages are constants.
LossStats accumulate_gradients(const AgentParams& params, const EpisodeRollout& rollout, const LossWeights& weights,
                               double weight, AgentParams& grads);

/// Scales grad in place so its norm is at most max_norm; returns the old norm.
double clip_global_norm(Vector& grad, double max_norm);

class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Vector& params, const Vector& grad);
  std::size_t steps() const { return t_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  Vector m_, v_;
};

/// One optimizer step on the batch mean of the rollouts' losses.
LossStats a2c_update(AgentParams& params, const std::vector<const EpisodeRollout*>& batch, const TrainConfig& config,
                     double entropy_coef, Adam& optimizer, std::vector<LossStats>* per_rollout = nullptr);

struct EpisodeMetrics {
  std::size_t worker = 0;
  std::size_t epoch = 0;
  std::size_t episode = 0;
  std::size_t task_id = 0;
  std::size_t exposure = 0;
  double episode_return = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_rgate = 0.0;
};

extern const char* const kMetricsColumns;
void write_metrics_header(std::ostream& out, const FileStamp& stamp);
void write_metrics_row(std::ostream& out, const EpisodeMetrics& m);
std::vector<EpisodeMetrics> read_metrics_csv(std::istream& in, FileStamp* stamp = nullptr);

struct Learner {
  AgentParams* params;
  Adam* optimizer;
  const TrainConfig* config;
  double entropy_coef;
};

struct EpochResult {
  std::vector<TrajectoryStep> steps;
  std::vector<EpisodeMetrics> metrics;
};

/// Plays the plan's episodes in order: rollout, (train) update, end_episode;
/// clears the DND at the end. Eval mode verifies the weights are untouched.
EpochResult run_epoch(Agent& agent, Environment& env, const EpochPlan& plan, RunMode mode, Rng& rng,
                      std::size_t epoch_index, Learner* learner = nullptr, bool greedy = false);

struct EvalResult {
  std::vector<TrajectoryStep> steps;
  std::vector<EpisodeMetrics> metrics;
  double mean_return = 0.0;
  std::uint64_t fingerprint_before = 0;
  std::uint64_t fingerprint_after = 0;
};

class Trainer {
 public:
  using EpisodeCallback = std::function<void(const EpisodeMetrics&)>;
  using EvalCallback = std::function<void(std::size_t epoch, const EvalResult&)>;

  Trainer(TaskSetup task, AgentVariant variant, int hidden, TrainConfig config);
  Trainer(TaskSetup task, AgentParams params, TrainConfig config);

  void train(const EpisodeCallback& on_episode = {}, const EvalCallback& on_eval = {});

  /// Frozen-weight evaluation over fresh epochs.
  EvalResult evaluate(std::size_t epochs, std::uint64_t seed, bool greedy = false) const;

  const AgentParams& params() const { return params_; }
  const TaskSetup& task() const { return task_; }
  const TrainConfig& config() const { return config_; }
  std::size_t skipped_updates() const { return skipped_; }

 private:
  TaskSetup task_;
  TrainConfig config_;
  AgentParams params_;
  std::size_t skipped_ = 0;
};

/// Runs fn(i) for i in [0, n) on up to `threads` threads.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace emrl
