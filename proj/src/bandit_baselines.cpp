#include "emrl/bandit_baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emrl {

namespace {

// Value of the best policy over n remaining pulls when the safe arm pays
// lambda per pull and the risky arm has posterior (a, b). `first_forced`
// makes the first pull go to the risky arm.
class IndexDp {
 public:
  IndexDp(double a, double b, int horizon) : a_(a), b_(b), h_(horizon) {
    const std::size_t side = static_cast<std::size_t>(h_) + 1;
    value_.assign(side * side * side, 0.0);
  }

  double continue_value(double lambda) {
    // value_[i][j][n]: i successes and j failures seen, n pulls remain.
    for (int n = 1; n <= h_; ++n) {
      for (int i = 0; i + n <= h_; ++i) {
        for (int j = 0; i + j + n <= h_; ++j) {
          const double risky = pull(i, j, n);
          at(i, j, n) = std::max(n * lambda, risky);
        }
      }
    }
    return pull(0, 0, h_);
  }

 private:
  double pull(int i, int j, int n) {
    const double p = (a_ + i) / (a_ + b_ + i + j);
    return p * (1.0 + at(i + 1, j, n - 1)) + (1.0 - p) * at(i, j + 1, n - 1);
  }
  double& at(int i, int j, int n) {
    const std::size_t side = static_cast<std::size_t>(h_) + 1;
    return value_[(static_cast<std::size_t>(i) * side + j) * side + n];
  }

  double a_, b_;
  int h_;
  std::vector<double> value_;
};

}  // namespace

double gittins_index(const BetaPosterior& posterior, int horizon, double tolerance) {
  if (horizon < 1) throw std::invalid_argument("gittins_index: horizon must be at least 1");
  if (!(posterior.alpha >= 1.0) || !(posterior.beta >= 1.0))
    throw std::invalid_argument("gittins_index: posterior parameters must be at least 1");
  if (horizon == 1) return posterior.mean();
  IndexDp dp(posterior.alpha, posterior.beta, horizon);
  double lo = 0.0, hi = 1.0;
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (dp.continue_value(mid) > horizon * mid)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double GittinsTable::index(const BetaPosterior& posterior, int horizon) {
  const auto key = std::make_tuple(std::lround(posterior.alpha), std::lround(posterior.beta), horizon);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const double v = gittins_index(posterior, horizon);
  cache_.emplace(key, v);
  return v;
}

int ucb_select(const std::vector<int>& counts, const std::vector<double>& means, int t) {
  if (t < 1) throw std::invalid_argument("ucb_select: t must be at least 1");
  if (counts.empty() || counts.size() != means.size()) throw std::invalid_argument("ucb_select: bad arm vectors");
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (counts[i] == 0) return static_cast<int>(i);
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double v = means[i] + std::sqrt(2.0 * std::log(static_cast<double>(t)) / counts[i]);
    if (v > best_v) {
      best_v = v;
      best = static_cast<int>(i);
    }
  }
  return best;
}

double sample_beta(double alpha, double beta, Rng& rng) {
  const double x = std::gamma_distribution<double>(alpha, 1.0)(rng);
  const double y = std::gamma_distribution<double>(beta, 1.0)(rng);
  return x / (x + y);
}

int thompson_select(const std::vector<BetaPosterior>& posteriors, Rng& rng) {
  if (posteriors.empty()) throw std::invalid_argument("thompson_select: no arms");
  int best = 0;
  double best_v = -1.0;
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const double v = sample_beta(posteriors[i].alpha, posteriors[i].beta, rng);
    if (v > best_v) {
      best_v = v;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::string_view to_string(BaselinePolicy p) {
  switch (p) {
    case BaselinePolicy::Gittins: return "gittins";
    case BaselinePolicy::Ucb: return "ucb";
    case BaselinePolicy::Thompson: return "thompson";
    case BaselinePolicy::Random: return "random";
  }
  return "?";
}

BaselinePolicy baseline_policy_from_string(std::string_view name) {
  for (auto p : {BaselinePolicy::Gittins, BaselinePolicy::Ucb, BaselinePolicy::Thompson, BaselinePolicy::Random})
    if (to_string(p) == name) return p;
  throw std::invalid_argument("unknown baseline policy: " + std::string(name));
}

BanditBaseline::BanditBaseline(BaselinePolicy policy, int n_arms, int trials, GittinsTable* table)
    : policy_(policy), trials_(trials), posteriors_(n_arms), counts_(n_arms, 0), sums_(n_arms, 0.0),
      table_(table ? table : &own_table_) {
  if (n_arms < 1 || trials < 1) throw std::invalid_argument("BanditBaseline: need arms and trials");
}

int BanditBaseline::select(Rng& rng) {
  const int n = static_cast<int>(posteriors_.size());
  switch (policy_) {
    case BaselinePolicy::Random: return static_cast<int>(uniform_index(n, rng));
    case BaselinePolicy::Thompson: return thompson_select(posteriors_, rng);
    case BaselinePolicy::Ucb: {
      std::vector<double> means(n, 0.0);
      for (int i = 0; i < n; ++i)
        if (counts_[i] > 0) means[i] = sums_[i] / counts_[i];
      return ucb_select(counts_, means, std::max(t_, 1));
    }
    case BaselinePolicy::Gittins: {
      const int horizon = std::max(trials_ - t_, 1);
      int best = 0;
      double best_v = -1.0;
      for (int i = 0; i < n; ++i) {
        const double v = table_->index(posteriors_[i], horizon);
        if (v > best_v) {
          best_v = v;
          best = i;
        }
      }
      return best;
    }
  }
  throw std::logic_error("unreachable baseline policy");
}

void BanditBaseline::observe(int arm, double reward) {
  posteriors_.at(arm).update(reward > 0.5);
  counts_[arm] += 1;
  sums_[arm] += reward;
  ++t_;
}

BaselineRun run_baseline(BaselinePolicy policy, const TaskSetup& task, std::size_t epochs, std::uint64_t seed) {
  if (task.env.kind != EnvKind::BarcodeBandit && task.env.kind != EnvKind::ClassBandit)
    throw std::invalid_argument("baselines run on barcode or class bandits only");
  Rng rng(seed);
  GittinsTable table;
  BaselineRun out;
  const int trials = task.env.trials;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const EpochPlan plan = next_epoch_plan(task, rng);
    for (std::size_t e = 0; e < plan.episodes.size(); ++e) {
      const TaskSpec& spec = plan.tasks.at(plan.episodes[e].tasks.at(0));
      const auto& probs = spec.mdp.arm_probs;
      const int n_arms = static_cast<int>(probs.size());
      const double best = *std::max_element(probs.begin(), probs.end());
      BanditBaseline agent(policy, n_arms, trials, &table);
      EpisodeMetrics m;
      m.epoch = epoch;
      m.episode = e;
      m.task_id = spec.task_id;
      m.exposure = plan.episodes[e].exposures.at(0);
      for (int t = 0; t < trials; ++t) {
        const int arm = agent.select(rng);
        const double reward = bernoulli(probs.at(arm), rng) ? 1.0 : 0.0;
        agent.observe(arm, reward);
        TrajectoryStep s;
        s.epoch = epoch;
        s.episode = e;
        s.step = t;
        s.task_id = spec.task_id;
        s.exposure = m.exposure;
        s.action = arm;
        s.reward = reward;
        s.optimal_expected_reward = best;
        s.chosen_expected_reward = probs[arm];
        s.target = spec.mdp.target;
        out.steps.push_back(s);
        m.episode_return += reward;
      }
      out.metrics.push_back(m);
    }
  }
  return out;
}

}  // namespace emrl
