#pragma once

// Context-free bandit baselines: a finite-horizon Bayesian (Gittins-style)
// index, UCB1, Thompson sampling and uniform random choice.

#include "emrl/common.hpp"
#include "emrl/trainer.hpp"

#include <map>
#include <string_view>
#include <tuple>
#include <vector>

namespace emrl {

struct BetaPosterior {
  double alpha = 1.0;  // successes + 1
  double beta = 1.0;   // failures + 1

  double mean() const { return alpha / (alpha + beta); }
  void update(bool success) { (success ? alpha : beta) += 1.0; }
};

inline constexpr double kGittinsTolerance = 1e-4;

/// Calibration payoff lambda at which pulling this arm for up to `horizon`
/// pulls (retiring whenever it pays) and taking lambda on every pull are
/// worth the same. Undiscounted; horizon 1 gives the posterior mean.
double gittins_index(const BetaPosterior& posterior, int horizon, double tolerance = kGittinsTolerance);

/// Memoized gittins_index over integer posterior counts.
class GittinsTable {
 public:
  double index(const BetaPosterior& posterior, int horizon);
  std::size_t size() const { return cache_.size(); }

 private:
  std::map<std::tuple<long, long, int>, double> cache_;
};

/// Unpulled arms first in index order, then argmax mean + sqrt(2 ln t / n);
/// ties go to the lowest index.
int ucb_select(const std::vector<int>& counts, const std::vector<double>& means, int t);

double sample_beta(double alpha, double beta, Rng& rng);
int thompson_select(const std::vector<BetaPosterior>& posteriors, Rng& rng);

enum class BaselinePolicy { Gittins, Ucb, Thompson, Random };

std::string_view to_string(BaselinePolicy p);
BaselinePolicy baseline_policy_from_string(std::string_view name);

/// Per-episode state of one baseline; fresh for every episode.
class BanditBaseline {
 public:
  BanditBaseline(BaselinePolicy policy, int n_arms, int trials, GittinsTable* table = nullptr);

  int select(Rng& rng);
  void observe(int arm, double reward);

  const std::vector<BetaPosterior>& posteriors() const { return posteriors_; }

 private:
  BaselinePolicy policy_;
  int trials_;
  int t_ = 0;
  std::vector<BetaPosterior> posteriors_;
  std::vector<int> counts_;
  std::vector<double> sums_;
  GittinsTable* table_;
  GittinsTable own_table_;
};

struct BaselineRun {
  std::vector<TrajectoryStep> steps;
  std::vector<EpisodeMetrics> metrics;
};

/// Plays the bandit episodes of `epochs` freshly sampled epochs. The baseline
/// never sees the context; exposure counts are logged from the plan anyway.
BaselineRun run_baseline(BaselinePolicy policy, const TaskSetup& task, std::size_t epochs, std::uint64_t seed);

}  // namespace emrl
