#pragma once

// The five task families behind one episodic interface. Each family also has
// a free step function that carries the actual transition/reward rule.

#include "emrl/common.hpp"
#include "emrl/taskgen.hpp"

#include <array>
#include <memory>
#include <optional>
#include <vector>

namespace emrl {

inline constexpr int kBanditTrials = 10;
inline constexpr int kMazeSide = 4;
inline constexpr int kMazeCells = kMazeSide * kMazeSide;
inline constexpr int kMazeHorizon = 20;

struct Observation {
  Vector stimulus;
  int trial_index = 0;
};

// --- bandits ---------------------------------------------------------------

struct BanditTask {
  std::vector<double> arm_probs;
  Vector context;
  int trials = kBanditTrials;
};

struct BanditOutcome {
  double reward = 0.0;
  bool done = false;
};

BanditOutcome bandit_step(const BanditTask& task, int trial, int action, Rng& rng);

struct CompositionalTask {
  std::array<double, 2> probs{};     // reward probability of each stimulus
  std::array<Vector, 2> stimuli;
  int stimulus_at_position0 = 0;     // which stimulus currently sits on action 0
  int trials = kBanditTrials;

  int stimulus_at(int position) const { return position == 0 ? stimulus_at_position0 : 1 - stimulus_at_position0; }
  /// Both stimuli concatenated in position order.
  Vector observation() const;
};

struct CompositionalOutcome {
  double reward = 0.0;
  bool done = false;
  Vector next_stimuli;
};

/// Pays according to the stimulus at the chosen position, then re-draws which
/// position each stimulus occupies.
CompositionalOutcome compositional_step(CompositionalTask& task, int trial, int action, Rng& rng);

// --- water maze -------------------------------------------------------------

enum class MazeAction : int { Left = 0, Right = 1, Up = 2, Down = 3 };

struct MazeTask {
  int goal = 0;
  Vector context;
  int horizon = kMazeHorizon;
};

struct MazeOutcome {
  int position = 0;  // after the move, or the respawn cell when the goal was hit
  double reward = 0.0;
  bool done = false;
  bool respawned = false;
};

inline int maze_cell(int x, int y) { return y * kMazeSide + x; }
inline int maze_x(int cell) { return cell % kMazeSide; }
inline int maze_y(int cell) { return cell / kMazeSide; }

/// Moves within the grid (walls keep the position). Reaching the goal pays 1
/// and respawns uniformly on a non-goal cell. `step_index` is 0-based.
MazeOutcome maze_step(const MazeTask& task, int position, int action, int step_index, Rng& rng);

int maze_random_start(int goal, Rng& rng);
int maze_shortest_path(int from, int to);
Vector maze_coordinates(int cell);

// --- episodic two-step task --------------------------------------------------

struct TwoStepRecord {
  int action = 0;
  int state = 0;
  bool common = true;
  double reward = 0.0;
  bool cued = false;
  std::optional<std::size_t> cue_ref;
  Vector barcode;
};

using TwoStepArchive = std::vector<TwoStepRecord>;

inline constexpr double kDefaultCommonProb = 0.8;
inline constexpr double kDefaultReversalProb = 0.1;

/// One traversal of the two-stage MDP.
struct TwoStepTask {
  TwoStepTask(std::array<double, 2> reward_probs, std::optional<std::size_t> cue, Vector barcode,
              const TwoStepArchive& archive, double common_prob = kDefaultCommonProb,
              double reversal_prob = kDefaultReversalProb);

  std::array<double, 2> reward_probs;
  std::optional<std::size_t> cue;
  Vector barcode;
  double common_prob;
  double reversal_prob;

  // Filled by stage 1.
  int action = -1;
  int state = -1;
  bool common = true;
  double reward = 0.0;
  bool reversed = false;
};

struct TwoStepOutcome {
  Observation obs;
  double reward = 0.0;
  bool done = false;
};

/// Stage 1: action 0/1 leads to state 0/1 through the common transition with
/// probability common_prob, else to the other state, and pays the stage
/// reward: on a cued traversal reaching the archived state, exactly the
/// archived reward; otherwise a Bernoulli draw. Stage 2 archives the traversal
/// and reverses the reward probabilities with probability reversal_prob.
TwoStepOutcome twostep_step(TwoStepTask& task, int stage, int action, Rng& rng, TwoStepArchive& archive);

inline constexpr int kTwoStepObsDim = 5;  // stage1, stage2, cue present, at s1, at s2
Vector twostep_observation(int stage, bool cued, int state);

// --- uniform episodic interface ---------------------------------------------

struct StepInfo {
  double optimal_expected_reward = 0.0;
  double chosen_expected_reward = 0.0;
  int stage = 0;
  bool cued = false;
  int transition = -1;  // 0 common, 1 uncommon
  int state_reached = -1;
  int position = -1;    // maze cell the action was taken from
  int target = -1;      // best arm or goal cell
  bool goal_reached = false;
  bool respawned = false;
  int traversal = -1;
  long cue_ref = -1;    // traversal a two-step cue points at
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
  bool write_point = false;  // agent should store its cell state now
  StepInfo info;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvKind kind() const = 0;
  virtual int n_actions() const = 0;
  virtual int observation_dim() const = 0;
  /// Width of the context fed as input to the context-augmented baseline.
  virtual int context_input_dim() const = 0;
  virtual int query_dim() const = 0;
  virtual int horizon() const = 0;

  virtual void reset(const EpochPlan& plan, std::size_t episode, Rng& rng) = 0;
  virtual Observation observe() const = 0;
  virtual Vector context_input() const = 0;
  /// DND query for the current step; empty when nothing cues a memory.
  virtual std::optional<Vector> query_key(Rng& rng) const = 0;
  virtual StepResult step(int action, Rng& rng) = 0;
  virtual std::vector<Vector> write_keys() const = 0;
  virtual bool done() const = 0;
};

struct EnvOptions {
  EnvKind kind = EnvKind::BarcodeBandit;
  int n_arms = 10;
  int trials = kBanditTrials;
  int barcode_length = 10;
  int class_dim = kClassEmbeddingDim;
  int maze_horizon = kMazeHorizon;
  int twostep_traversals = 100;
  int twostep_cued_from = 50;
  double common_prob = kDefaultCommonProb;
  double reversal_prob = kDefaultReversalProb;
};

std::unique_ptr<Environment> make_environment(const EnvOptions& options);

/// Single-episode plan carrying nothing; two-step epochs generate their own
/// barcodes, cues and reward schedule inside the environment.
EpochPlan make_two_step_plan(Rng& rng);

/// Read-only view of the two-step archive for analysis.
const TwoStepArchive* two_step_archive(const Environment& env);

}  // namespace emrl
