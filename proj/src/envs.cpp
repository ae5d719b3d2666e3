#include "emrl/envs.hpp"

#include <algorithm>
#include <cstdlib>

namespace emrl {

BanditOutcome bandit_step(const BanditTask& task, int trial, int action, Rng& rng) {
  if (action < 0 || action >= static_cast<int>(task.arm_probs.size()))
    throw std::out_of_range("bandit: action " + std::to_string(action) + " out of range");
  if (trial < 0 || trial >= task.trials) throw std::logic_error("bandit: trial beyond episode end");
  BanditOutcome out;
  out.reward = bernoulli(task.arm_probs[action], rng) ? 1.0 : 0.0;
  out.done = trial + 1 == task.trials;
  return out;
}

Vector CompositionalTask::observation() const {
  const Eigen::Index d = stimuli[0].size();
  Vector out(2 * d);
  out.head(d) = stimuli[stimulus_at(0)];
  out.tail(d) = stimuli[stimulus_at(1)];
  return out;
}

CompositionalOutcome compositional_step(CompositionalTask& task, int trial, int action, Rng& rng) {
  if (action < 0 || action > 1) throw std::out_of_range("compositional bandit: action must be 0 or 1");
  if (trial < 0 || trial >= task.trials) throw std::logic_error("compositional bandit: trial beyond episode end");
  CompositionalOutcome out;
  out.reward = bernoulli(task.probs[task.stimulus_at(action)], rng) ? 1.0 : 0.0;
  out.done = trial + 1 == task.trials;
  task.stimulus_at_position0 = static_cast<int>(uniform_index(2, rng));
  out.next_stimuli = task.observation();
  return out;
}

int maze_random_start(int goal, Rng& rng) {
  int cell = static_cast<int>(uniform_index(kMazeCells - 1, rng));
  return cell >= goal ? cell + 1 : cell;
}

int maze_shortest_path(int from, int to) {
  return std::abs(maze_x(from) - maze_x(to)) + std::abs(maze_y(from) - maze_y(to));
}

Vector maze_coordinates(int cell) {
  Vector v = Vector::Zero(2 * kMazeSide);
  v[maze_x(cell)] = 1.0;
  v[kMazeSide + maze_y(cell)] = 1.0;
  return v;
}

MazeOutcome maze_step(const MazeTask& task, int position, int action, int step_index, Rng& rng) {
  if (position < 0 || position >= kMazeCells) throw std::out_of_range("maze: position outside grid");
  if (step_index < 0 || step_index >= task.horizon) throw std::logic_error("maze: step beyond episode end");
  int x = maze_x(position);
  int y = maze_y(position);
  switch (static_cast<MazeAction>(action)) {
    case MazeAction::Left: x = std::max(0, x - 1); break;
    case MazeAction::Right: x = std::min(kMazeSide - 1, x + 1); break;
    case MazeAction::Up: y = std::max(0, y - 1); break;
    case MazeAction::Down: y = std::min(kMazeSide - 1, y + 1); break;
    default: throw std::out_of_range("maze: action must be in [0, 4)");
  }
  MazeOutcome out;
  out.position = maze_cell(x, y);
  if (out.position == task.goal) {
    out.reward = 1.0;
    out.respawned = true;
    out.position = maze_random_start(task.goal, rng);
  }
  out.done = step_index + 1 == task.horizon;
  return out;
}

TwoStepTask::TwoStepTask(std::array<double, 2> probs, std::optional<std::size_t> cue_ref, Vector code,
                         const TwoStepArchive& archive, double common, double reversal)
    : reward_probs(probs), cue(cue_ref), barcode(std::move(code)), common_prob(common), reversal_prob(reversal) {
  if (cue && *cue >= archive.size())
    throw std::invalid_argument("two-step: cue references episode " + std::to_string(*cue) + " missing from archive");
}

Vector twostep_observation(int stage, bool cued, int state) {
  Vector v = Vector::Zero(kTwoStepObsDim);
  v[stage == 1 ? 0 : 1] = 1.0;
  v[2] = cued ? 1.0 : 0.0;
  if (stage == 2 && state >= 0) v[3 + state] = 1.0;
  return v;
}

TwoStepOutcome twostep_step(TwoStepTask& task, int stage, int action, Rng& rng, TwoStepArchive& archive) {
  TwoStepOutcome out;
  if (stage == 1) {
    if (action < 0 || action > 1) throw std::out_of_range("two-step: first-stage action must be 0 or 1");
    task.action = action;
    task.common = bernoulli(task.common_prob, rng);
    task.state = task.common ? action : 1 - action;
    if (task.cue && archive.at(*task.cue).state == task.state) {
      task.reward = archive[*task.cue].reward;
    } else {
      task.reward = bernoulli(task.reward_probs[task.state], rng) ? 1.0 : 0.0;
    }
    out.reward = task.reward;
    out.obs.stimulus = twostep_observation(2, task.cue.has_value(), task.state);
    out.obs.trial_index = 1;
    return out;
  }
  if (stage != 2) throw std::invalid_argument("two-step: stage must be 1 or 2");
  if (task.state < 0) throw std::logic_error("two-step: second stage before first");
  archive.push_back({task.action, task.state, task.common, task.reward, task.cue.has_value(), task.cue, task.barcode});
  task.reversed = bernoulli(task.reversal_prob, rng);
  if (task.reversed) std::swap(task.reward_probs[0], task.reward_probs[1]);
  out.done = true;
  out.obs.stimulus = twostep_observation(1, false, -1);
  return out;
}

namespace {

void require_running(bool done) {
  if (done) throw std::logic_error("step called on a finished episode");
}

class BanditEnv final : public Environment {
 public:
  explicit BanditEnv(const EnvOptions& o)
      : kind_(o.kind), n_arms_(o.n_arms), trials_(o.trials),
        context_dim_(o.kind == EnvKind::ClassBandit ? o.class_dim : o.barcode_length) {}

  EnvKind kind() const override { return kind_; }
  int n_actions() const override { return n_arms_; }
  int observation_dim() const override { return 0; }
  int context_input_dim() const override { return context_dim_; }
  int query_dim() const override { return context_dim_; }
  int horizon() const override { return trials_; }

  void reset(const EpochPlan& plan, std::size_t episode, Rng&) override {
    const auto& ep = plan.episodes.at(episode);
    const auto& spec = plan.tasks.at(ep.tasks.at(0));
    if (static_cast<int>(spec.mdp.arm_probs.size()) != n_arms_) throw std::invalid_argument("bandit: arm count mismatch");
    task_ = {spec.mdp.arm_probs, ep.contexts.at(0), trials_};
    target_ = spec.mdp.target;
    trial_ = 0;
    done_ = false;
  }

  Observation observe() const override { return {Vector(0), trial_}; }
  Vector context_input() const override { return task_.context; }
  std::optional<Vector> query_key(Rng&) const override { return task_.context; }

  StepResult step(int action, Rng& rng) override {
    require_running(done_);
    const auto o = bandit_step(task_, trial_, action, rng);
    StepResult r;
    r.reward = o.reward;
    r.done = o.done;
    r.write_point = o.done;
    r.info.optimal_expected_reward = *std::max_element(task_.arm_probs.begin(), task_.arm_probs.end());
    r.info.chosen_expected_reward = task_.arm_probs[action];
    r.info.target = target_;
    ++trial_;
    done_ = o.done;
    return r;
  }

  std::vector<Vector> write_keys() const override { return {task_.context}; }
  bool done() const override { return done_; }

 private:
  EnvKind kind_;
  int n_arms_;
  int trials_;
  int context_dim_;
  BanditTask task_;
  int target_ = -1;
  int trial_ = 0;
  bool done_ = true;
};

class CompositionalEnv final : public Environment {
 public:
  explicit CompositionalEnv(const EnvOptions& o) : trials_(o.trials), dim_(o.class_dim) {}

  EnvKind kind() const override { return EnvKind::CompositionalBandit; }
  int n_actions() const override { return 2; }
  int observation_dim() const override { return 2 * dim_; }
  int context_input_dim() const override { return 0; }
  int query_dim() const override { return dim_; }
  int horizon() const override { return trials_; }

  void reset(const EpochPlan& plan, std::size_t episode, Rng& rng) override {
    const auto& ep = plan.episodes.at(episode);
    if (ep.tasks.size() != 2) throw std::invalid_argument("compositional episode needs two tasks");
    for (int s = 0; s < 2; ++s) {
      task_.probs[s] = plan.tasks.at(ep.tasks[s]).mdp.arm_probs.at(0);
      task_.stimuli[s] = ep.contexts.at(s);
      if (task_.stimuli[s].size() != dim_) throw std::invalid_argument("compositional: stimulus dimension mismatch");
    }
    task_.trials = trials_;
    task_.stimulus_at_position0 = static_cast<int>(uniform_index(2, rng));
    trial_ = 0;
    done_ = false;
  }

  Observation observe() const override { return {task_.observation(), trial_}; }
  Vector context_input() const override { return Vector(0); }
  std::optional<Vector> query_key(Rng& rng) const override { return task_.stimuli[uniform_index(2, rng)]; }

  StepResult step(int action, Rng& rng) override {
    require_running(done_);
    StepResult r;
    r.info.optimal_expected_reward = std::max(task_.probs[0], task_.probs[1]);
    r.info.chosen_expected_reward = task_.probs[task_.stimulus_at(action)];
    r.info.target = task_.probs[task_.stimulus_at(0)] >= task_.probs[task_.stimulus_at(1)] ? 0 : 1;
    const auto o = compositional_step(task_, trial_, action, rng);
    r.reward = o.reward;
    r.done = o.done;
    r.write_point = o.done;
    ++trial_;
    done_ = o.done;
    return r;
  }

  std::vector<Vector> write_keys() const override { return {task_.stimuli[0], task_.stimuli[1]}; }
  bool done() const override { return done_; }

 private:
  int trials_;
  int dim_;
  CompositionalTask task_;
  int trial_ = 0;
  bool done_ = true;
};

class MazeEnv final : public Environment {
 public:
  explicit MazeEnv(const EnvOptions& o) : horizon_(o.maze_horizon), context_dim_(o.barcode_length) {}

  EnvKind kind() const override { return EnvKind::WaterMaze; }
  int n_actions() const override { return 4; }
  int observation_dim() const override { return 2 * kMazeSide; }
  int context_input_dim() const override { return context_dim_; }
  int query_dim() const override { return context_dim_; }
  int horizon() const override { return horizon_; }

  void reset(const EpochPlan& plan, std::size_t episode, Rng& rng) override {
    const auto& ep = plan.episodes.at(episode);
    const auto& spec = plan.tasks.at(ep.tasks.at(0));
    if (spec.mdp.target < 0 || spec.mdp.target >= kMazeCells) throw std::invalid_argument("maze: goal outside grid");
    task_ = {spec.mdp.target, ep.contexts.at(0), horizon_};
    position_ = maze_random_start(task_.goal, rng);
    step_ = 0;
    done_ = false;
  }

  Observation observe() const override { return {maze_coordinates(position_), step_}; }
  Vector context_input() const override { return task_.context; }
  std::optional<Vector> query_key(Rng&) const override { return task_.context; }

  StepResult step(int action, Rng& rng) override {
    require_running(done_);
    StepResult r;
    r.info.position = position_;
    r.info.target = task_.goal;
    const auto o = maze_step(task_, position_, action, step_, rng);
    r.reward = o.reward;
    r.done = o.done;
    r.write_point = o.done;
    r.info.goal_reached = o.respawned;
    r.info.respawned = o.respawned;
    position_ = o.position;
    ++step_;
    done_ = o.done;
    return r;
  }

  std::vector<Vector> write_keys() const override { return {task_.context}; }
  bool done() const override { return done_; }
  int position() const { return position_; }

 private:
  int horizon_;
  int context_dim_;
  MazeTask task_;
  int position_ = 0;
  int step_ = 0;
  bool done_ = true;
};

}  // namespace

class TwoStepEnv final : public Environment {
 public:
  explicit TwoStepEnv(const EnvOptions& o)
      : traversals_(o.twostep_traversals), cued_from_(o.twostep_cued_from), length_(o.barcode_length),
        common_(o.common_prob), reversal_(o.reversal_prob) {
    if (traversals_ < 1 || cued_from_ < 1 || cued_from_ > traversals_)
      throw std::invalid_argument("two-step: cued block must start after at least one uncued traversal");
  }

  EnvKind kind() const override { return EnvKind::TwoStep; }
  int n_actions() const override { return 2; }
  int observation_dim() const override { return kTwoStepObsDim; }
  int context_input_dim() const override { return length_; }
  int query_dim() const override { return length_; }
  int horizon() const override { return 2 * traversals_; }

  void reset(const EpochPlan&, std::size_t, Rng& rng) override {
    barcodes_ = sample_unique_barcodes(length_, static_cast<std::size_t>(traversals_), rng);
    archive_.clear();
    probs_ = bernoulli(0.5, rng) ? std::array<double, 2>{0.9, 0.1} : std::array<double, 2>{0.1, 0.9};
    traversal_ = 0;
    stage_ = 1;
    done_ = false;
    begin_traversal(rng);
  }

  Observation observe() const override {
    return {twostep_observation(stage_, task_->cue.has_value(), stage_ == 2 ? task_->state : -1), stage_ - 1};
  }

  Vector context_input() const override {
    if (stage_ == 2) return task_->barcode;
    return task_->cue ? archive_[*task_->cue].barcode : Vector::Zero(length_);
  }

  std::optional<Vector> query_key(Rng&) const override {
    if (stage_ == 1 && !task_->cue) return std::nullopt;
    return context_input();
  }

  StepResult step(int action, Rng& rng) override {
    require_running(done_);
    StepResult r;
    r.info.stage = stage_;
    r.info.cued = task_->cue.has_value();
    r.info.traversal = traversal_;
    if (task_->cue) r.info.cue_ref = static_cast<long>(*task_->cue);
    if (stage_ == 1) {
      const auto o = twostep_step(*task_, 1, action, rng, archive_);
      r.reward = o.reward;
      r.info.transition = task_->common ? 0 : 1;
      r.info.state_reached = task_->state;
      r.info.optimal_expected_reward = std::max(probs_[0], probs_[1]);
      r.info.chosen_expected_reward =
          common_ * probs_[action] + (1.0 - common_) * probs_[1 - action];
      stage_ = 2;
      return r;
    }
    if (action < 0 || action > 1) throw std::out_of_range("two-step: action must be 0 or 1");
    r.info.transition = task_->common ? 0 : 1;
    r.info.state_reached = task_->state;
    twostep_step(*task_, 2, action, rng, archive_);
    probs_ = task_->reward_probs;
    r.write_point = true;
    ++traversal_;
    if (traversal_ == traversals_) {
      r.done = true;
      done_ = true;
      written_key_ = task_->barcode;
      return r;
    }
    written_key_ = task_->barcode;
    stage_ = 1;
    begin_traversal(rng);
    return r;
  }

  std::vector<Vector> write_keys() const override { return {written_key_}; }
  bool done() const override { return done_; }
  const TwoStepArchive& archive() const { return archive_; }

 private:
  void begin_traversal(Rng& rng) {
    std::optional<std::size_t> cue;
    if (traversal_ >= cued_from_) cue = uniform_index(static_cast<std::size_t>(traversal_), rng);
    task_.emplace(probs_, cue, barcodes_[traversal_], archive_, common_, reversal_);
  }

  int traversals_;
  int cued_from_;
  int length_;
  double common_;
  double reversal_;
  std::vector<Vector> barcodes_;
  TwoStepArchive archive_;
  std::array<double, 2> probs_{0.9, 0.1};
  std::optional<TwoStepTask> task_;
  Vector written_key_;
  int traversal_ = 0;
  int stage_ = 1;
  bool done_ = true;
};

std::unique_ptr<Environment> make_environment(const EnvOptions& o) {
  switch (o.kind) {
    case EnvKind::BarcodeBandit:
    case EnvKind::ClassBandit: return std::make_unique<BanditEnv>(o);
    case EnvKind::CompositionalBandit: return std::make_unique<CompositionalEnv>(o);
    case EnvKind::WaterMaze: return std::make_unique<MazeEnv>(o);
    case EnvKind::TwoStep: return std::make_unique<TwoStepEnv>(o);
  }
  throw std::invalid_argument("unknown environment kind");
}

EpochPlan make_two_step_plan(Rng& rng) {
  EpochPlan plan;
  plan.kind = EnvKind::TwoStep;
  plan.mapping_seed = rng();
  TaskSpec t;
  plan.tasks.push_back(t);
  plan.duplicates.push_back(1);
  plan.episodes.push_back({{0}, {Vector(0)}, {0}});
  return plan;
}

const TwoStepArchive* two_step_archive(const Environment& env) {
  auto* ts = dynamic_cast<const TwoStepEnv*>(&env);
  return ts ? &ts->archive() : nullptr;
}

}  // namespace emrl
