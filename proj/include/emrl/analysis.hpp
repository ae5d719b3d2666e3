#pragma once

// Statistics over trajectory logs: exposure-binned regret, maze
// steps-to-goal, r-gate time courses, classical tests and the two-step
// choice model.

#include "emrl/common.hpp"
#include "emrl/trainer.hpp"
#include "emrl/trajectory.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace emrl {

// --- regret -----------------------------------------------------------------

struct EpisodeRegret {
  std::size_t epoch = 0;
  std::size_t episode = 0;
  std::size_t exposure = 0;
  std::vector<double> cumulative;  // after trial 1..T
};

/// Splits a bandit log into episodes (consecutive rows sharing epoch and
/// episode) and accumulates optimal minus chosen expected reward.
std::vector<EpisodeRegret> episode_regrets(const std::vector<TrajectoryStep>& steps);

struct RegretCurve {
  std::size_t exposure = 0;
  std::size_t episodes = 0;
  std::vector<double> mean_cumulative;  // index t holds trial t+1
};

/// One curve per exposure bin that has episodes; bins between 0 and the
/// largest exposure with no episodes are skipped and reported in `warnings`.
std::vector<RegretCurve> regret_by_exposure(const std::vector<TrajectoryStep>& steps,
                                            std::vector<std::string>* warnings = nullptr);

// --- maze -------------------------------------------------------------------

struct GoalSegment {
  std::size_t epoch = 0;
  std::size_t episode = 0;
  std::size_t exposure = 0;
  int segment = 0;  // 0 runs from the episode start, later ones from respawns
  int steps = 0;
  bool censored = false;
  int optimal = 0;  // shortest path from the segment's start cell
};

/// Cuts every maze episode at its goal hits. A first segment without a goal
/// is censored at the horizon; an unfinished trailing segment after a
/// respawn is dropped.
std::vector<GoalSegment> goal_segments(const std::vector<TrajectoryStep>& steps, int horizon);

struct MeanCi {
  std::size_t n = 0;
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
};

/// Percentile bootstrap of the mean.
MeanCi bootstrap_mean_ci(const std::vector<double>& values, std::size_t resamples = 1000, double level = 0.95,
                         std::uint64_t seed = 12345);

struct MazeStepsSummary {
  std::size_t exposure = 0;
  std::string measure;  // "first" (start to first goal) or "all" (every segment)
  std::size_t censored = 0;
  MeanCi steps;
  double mean_optimal = 0.0;
};

std::vector<MazeStepsSummary> steps_to_goal_by_exposure(const std::vector<TrajectoryStep>& steps, int horizon,
                                                        std::size_t resamples = 1000, std::uint64_t seed = 12345);

// --- r-gate -----------------------------------------------------------------

struct RgatePoint {
  int stage = 0;
  bool cued = false;
  int step = 0;
  std::size_t n = 0;
  double mean = 0.0;
};

std::vector<RgatePoint> rgate_timecourse(const std::vector<TrajectoryStep>& steps);

// --- tests ------------------------------------------------------------------

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-tailed
  bool valid = false;
};

TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b);
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

struct SpearmanResult {
  double rho = 0.0;
  double p = 1.0;  // two-tailed
  bool exact = false;
};

/// Average ranks for ties; the p-value enumerates all permutations when
/// n <= 8 and otherwise uses the t approximation.
SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y);

double mean_of(const std::vector<double>& v);

// --- two-step choice model ----------------------------------------------------

struct ChoiceEpisode {
  std::size_t epoch = 0;
  std::size_t traversal = 0;
  int action = 0;  // stage-1 choice, 0 = a1
  bool rewarded = false;
  bool common = true;
  bool cued = false;
  long cue_ref = -1;
};

/// Stage-1 rows of a two-step log, in order.
std::vector<ChoiceEpisode> choice_episodes(const std::vector<TrajectoryStep>& steps);

inline constexpr int kChoiceTerms = 5;  // intercept, IMF, IMB, EMF, EMB
extern const std::array<const char*, kChoiceTerms> kChoiceTermNames;

/// The four signed strategy predictors for one outcome in {-1, 0, +1}.
struct StrategyTerms {
  double model_free = 0.0;
  double model_based = 0.0;
};
StrategyTerms strategy_terms(int action, bool rewarded, bool common);

/// Row per episode: {IMF, IMB, EMF, EMB}. Incremental terms look at the
/// previous episode of the same epoch (zero at an epoch's start); episodic
/// terms look at the cue-referenced episode (zero when uncued).
Matrix choice_predictors(const std::vector<ChoiceEpisode>& episodes);

struct ChoiceFitOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  double decrement_tolerance = 1e-12;  // Newton decrement g' H^-1 g
  double weight_cap = 20.0;
};

struct ChoiceModelFit {
  Vector beta;        // intercept then IMF, IMB, EMF, EMB
  Vector std_error;   // NaN for columns that carry no information
  double log_likelihood = 0.0;
  std::vector<double> log_likelihood_history;
  int iterations = 0;
  bool converged = false;
  bool separated = false;
  std::size_t n = 0;
};

/// Logistic maximum likelihood for P(a1) = sigmoid(b0 + X b) by damped
/// Newton ascent. `choose_a1[i]` is 1 when a1 was chosen.
ChoiceModelFit fit_logistic(const Matrix& predictors, const std::vector<int>& choose_a1,
                            const ChoiceFitOptions& options = {});

/// Needs at least 100 episodes.
ChoiceModelFit fit_choice_model(const std::vector<ChoiceEpisode>& episodes, const ChoiceFitOptions& options = {});

// --- tidy outputs -------------------------------------------------------------

struct StampedSteps {
  std::string path;
  FileStamp stamp;
  std::vector<TrajectoryStep> steps;
};

/// Throws when stamps disagree unless `force` is set.
void check_stamps(const std::vector<FileStamp>& stamps, bool force);

void write_training_curve_csv(std::ostream& out, const FileStamp& stamp, const std::vector<EpisodeMetrics>& metrics);
void write_regret_csv(std::ostream& out, const FileStamp& stamp, const std::vector<RegretCurve>& curves);
void write_maze_steps_csv(std::ostream& out, const FileStamp& stamp, const std::vector<MazeStepsSummary>& rows);
void write_rgate_csv(std::ostream& out, const FileStamp& stamp, const std::vector<RgatePoint>& points);
void write_rgate_test_csv(std::ostream& out, const FileStamp& stamp, const std::vector<double>& cued,
                          const std::vector<double>& uncued);

struct NamedFit {
  std::string subset;
  ChoiceModelFit fit;
};
void write_choice_fit_csv(std::ostream& out, const FileStamp& stamp, const std::vector<NamedFit>& fits);

/// Per-traversal mean r-gate split by cue; the two-step r-gate comparison.
void rgate_by_cue(const std::vector<TrajectoryStep>& steps, std::vector<double>& cued, std::vector<double>& uncued);

}  // namespace emrl
