#include "emrl/analysis.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace emrl {

namespace {

template <typename Fn>
void for_each_episode(const std::vector<TrajectoryStep>& steps, Fn fn) {
  std::size_t begin = 0;
  while (begin < steps.size()) {
    std::size_t end = begin + 1;
    while (end < steps.size() && steps[end].epoch == steps[begin].epoch && steps[end].episode == steps[begin].episode)
      ++end;
    fn(begin, end);
    begin = end;
  }
}

double two_tailed_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double sample_variance(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<EpisodeRegret> episode_regrets(const std::vector<TrajectoryStep>& steps) {
  std::vector<EpisodeRegret> out;
  for_each_episode(steps, [&](std::size_t b, std::size_t e) {
    EpisodeRegret r;
    r.epoch = steps[b].epoch;
    r.episode = steps[b].episode;
    r.exposure = steps[b].exposure;
    double total = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      total += steps[i].optimal_expected_reward - steps[i].chosen_expected_reward;
      r.cumulative.push_back(total);
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<RegretCurve> regret_by_exposure(const std::vector<TrajectoryStep>& steps,
                                            std::vector<std::string>* warnings) {
  const auto episodes = episode_regrets(steps);
  std::map<std::size_t, RegretCurve> bins;
  for (const auto& ep : episodes) {
    auto& c = bins[ep.exposure];
    c.exposure = ep.exposure;
    if (c.mean_cumulative.size() < ep.cumulative.size()) c.mean_cumulative.resize(ep.cumulative.size(), 0.0);
    for (std::size_t t = 0; t < ep.cumulative.size(); ++t) c.mean_cumulative[t] += ep.cumulative[t];
    c.episodes += 1;
  }
  std::vector<RegretCurve> out;
  if (bins.empty()) return out;
  const std::size_t max_exposure = bins.rbegin()->first;
  for (std::size_t e = 0; e <= max_exposure; ++e) {
    auto it = bins.find(e);
    if (it == bins.end()) {
      if (warnings) warnings->push_back("exposure bin " + std::to_string(e) + " has no episodes");
      continue;
    }
    RegretCurve c = it->second;
    for (double& v : c.mean_cumulative) v /= static_cast<double>(c.episodes);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<GoalSegment> goal_segments(const std::vector<TrajectoryStep>& steps, int horizon) {
  std::vector<GoalSegment> out;
  for_each_episode(steps, [&](std::size_t b, std::size_t e) {
    GoalSegment seg;
    seg.epoch = steps[b].epoch;
    seg.episode = steps[b].episode;
    seg.exposure = steps[b].exposure;
    const int goal = steps[b].target;
    std::size_t start = b;
    for (std::size_t i = b; i < e; ++i) {
      if (!steps[i].goal_reached) continue;
      seg.steps = static_cast<int>(i - start + 1);
      seg.optimal = maze_shortest_path(steps[start].position, goal);
      out.push_back(seg);
      seg.segment += 1;
      start = i + 1;
    }
    if (seg.segment == 0) {
      seg.steps = horizon;
      seg.censored = true;
      seg.optimal = maze_shortest_path(steps[b].position, goal);
      out.push_back(seg);
    }
  });
  return out;
}

MeanCi bootstrap_mean_ci(const std::vector<double>& values, std::size_t resamples, double level, std::uint64_t seed) {
  MeanCi out;
  out.n = values.size();
  if (values.empty()) {
    out.mean = out.low = out.high = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.mean = mean_of(values);
  if (resamples == 0) {
    out.low = out.high = out.mean;
    return out;
  }
  Rng rng(seed);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[uniform_index(values.size(), rng)];
    m = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  const auto pick = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(resamples - 1) + 0.5));
    return means[std::min(idx, resamples - 1)];
  };
  out.low = pick(tail);
  out.high = pick(1.0 - tail);
  return out;
}

std::vector<MazeStepsSummary> steps_to_goal_by_exposure(const std::vector<TrajectoryStep>& steps, int horizon,
                                                        std::size_t resamples, std::uint64_t seed) {
  const auto segments = goal_segments(steps, horizon);
  struct Acc {
    std::vector<double> steps;
    double optimal = 0.0;
    std::size_t censored = 0;
  };
  std::map<std::pair<std::size_t, int>, Acc> acc;  // (exposure, 0 first / 1 all)
  for (const auto& s : segments) {
    for (int measure = 0; measure < 2; ++measure) {
      if (measure == 0 && s.segment != 0) continue;
      auto& a = acc[{s.exposure, measure}];
      a.steps.push_back(s.steps);
      a.optimal += s.optimal;
      a.censored += s.censored ? 1 : 0;
    }
  }
  std::vector<MazeStepsSummary> out;
  for (const auto& [key, a] : acc) {
    MazeStepsSummary row;
    row.exposure = key.first;
    row.measure = key.second == 0 ? "first" : "all";
    row.censored = a.censored;
    row.steps = bootstrap_mean_ci(a.steps, resamples, 0.95, seed);
    row.mean_optimal = a.optimal / static_cast<double>(a.steps.size());
    out.push_back(row);
  }
  return out;
}

std::vector<RgatePoint> rgate_timecourse(const std::vector<TrajectoryStep>& steps) {
  std::map<std::tuple<int, bool, int>, std::pair<std::size_t, double>> acc;
  for (const auto& s : steps) {
    auto& a = acc[{s.stage, s.cued, s.step}];
    a.first += 1;
    a.second += s.r_gate_mean;
  }
  std::vector<RgatePoint> out;
  for (const auto& [key, a] : acc) {
    RgatePoint p;
    p.stage = std::get<0>(key);
    p.cued = std::get<1>(key);
    p.step = std::get<2>(key);
    p.n = a.first;
    p.mean = a.second / static_cast<double>(a.first);
    out.push_back(p);
  }
  return out;
}

void rgate_by_cue(const std::vector<TrajectoryStep>& steps, std::vector<double>& cued, std::vector<double>& uncued) {
  for_each_episode(steps, [&](std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += steps[i].r_gate_mean;
    (steps[b].cued ? cued : uncued).push_back(s / static_cast<double>(e - b));
  });
}

TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  TTestResult r;
  if (a.size() < 2 || b.size() < 2) return r;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = sample_variance(a, ma) / na, vb = sample_variance(b, mb) / nb;
  r.valid = true;
  const double se = std::sqrt(va + vb);
  if (se == 0.0) {
    r.df = na + nb - 2.0;
    if (ma == mb) return r;
    r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = (ma - mb) / se;
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p = two_tailed_p(r.t, r.df);
  return r;
}

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired t-test needs equal-length samples");
  TTestResult r;
  if (a.size() < 2) return r;
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double n = static_cast<double>(d.size());
  const double m = mean_of(d);
  const double se = std::sqrt(sample_variance(d, m) / n);
  r.valid = true;
  r.df = n - 1.0;
  if (se == 0.0) {
    if (m == 0.0) return r;
    r.t = m > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = m / se;
  r.p = two_tailed_p(r.t, r.df);
  return r;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman needs equal-length samples");
  SpearmanResult r;
  const std::size_t n = x.size();
  if (n < 3) return r;
  const auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  r.rho = pearson(rx, ry);
  if (n <= 8) {
    r.exact = true;
    std::sort(ry.begin(), ry.end());
    std::size_t hits = 0, total = 0;
    do {
      ++total;
      if (std::abs(pearson(rx, ry)) >= std::abs(r.rho) - 1e-12) ++hits;
    } while (std::next_permutation(ry.begin(), ry.end()));
    r.p = static_cast<double>(hits) / static_cast<double>(total);
    return r;
  }
  if (std::abs(r.rho) >= 1.0) {
    r.p = 0.0;
    return r;
  }
  const double t = r.rho * std::sqrt((static_cast<double>(n) - 2.0) / (1.0 - r.rho * r.rho));
  r.p = two_tailed_p(t, static_cast<double>(n) - 2.0);
  return r;
}

std::vector<ChoiceEpisode> choice_episodes(const std::vector<TrajectoryStep>& steps) {
  std::vector<ChoiceEpisode> out;
  for (const auto& s : steps) {
    if (s.stage != 1) continue;
    ChoiceEpisode c;
    c.epoch = s.epoch;
    c.traversal = s.episode;
    c.action = s.action;
    c.rewarded = s.reward > 0.5;
    c.common = s.transition == 0;
    c.cued = s.cued;
    c.cue_ref = s.cue_ref;
    out.push_back(c);
  }
  return out;
}

const std::array<const char*, kChoiceTerms> kChoiceTermNames = {"intercept", "IMF", "IMB", "EMF", "EMB"};

StrategyTerms strategy_terms(int action, bool rewarded, bool common) {
  StrategyTerms t;
  t.model_free = (rewarded ? 1.0 : -1.0) * (action == 0 ? 1.0 : -1.0);
  t.model_based = t.model_free * (common ? 1.0 : -1.0);
  return t;
}

Matrix choice_predictors(const std::vector<ChoiceEpisode>& episodes) {
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(episodes.size()), 4);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> where;
  for (std::size_t i = 0; i < episodes.size(); ++i) where[{episodes[i].epoch, episodes[i].traversal}] = i;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& ep = episodes[i];
    const auto row = static_cast<Eigen::Index>(i);
    if (i > 0 && episodes[i - 1].epoch == ep.epoch && episodes[i - 1].traversal + 1 == ep.traversal) {
      const auto& prev = episodes[i - 1];
      const auto t = strategy_terms(prev.action, prev.rewarded, prev.common);
      x(row, 0) = t.model_free;
      x(row, 1) = t.model_based;
    }
    if (ep.cued && ep.cue_ref >= 0) {
      auto it = where.find({ep.epoch, static_cast<std::size_t>(ep.cue_ref)});
      if (it != where.end()) {
        const auto& ref = episodes[it->second];
        const auto t = strategy_terms(ref.action, ref.rewarded, ref.common);
        x(row, 2) = t.model_free;
        x(row, 3) = t.model_based;
      }
    }
  }
  return x;
}

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double log_likelihood(const Matrix& x, const Vector& y, const Vector& beta) {
  const Vector z = x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) ll += y[i] * z[i] - softplus(z[i]);
  return ll;
}

}  // namespace

ChoiceModelFit fit_logistic(const Matrix& predictors, const std::vector<int>& choose_a1,
                            const ChoiceFitOptions& options) {
  const auto n = predictors.rows();
  if (n == 0 || static_cast<std::size_t>(n) != choose_a1.size())
    throw std::invalid_argument("fit_logistic: predictors and choices disagree");
  Matrix x(n, predictors.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(predictors.cols()) = predictors;
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = choose_a1[static_cast<std::size_t>(i)] ? 1.0 : 0.0;

  ChoiceModelFit fit;
  fit.n = static_cast<std::size_t>(n);
  Vector beta = Vector::Zero(x.cols());
  double ll = log_likelihood(x, y, beta);
  fit.log_likelihood_history.push_back(ll);

  const auto hessian = [&](const Vector& b) {
    const Vector p = sigmoid(Vector(x * b));
    const Vector w = p.array() * (1.0 - p.array());
    return Matrix(x.transpose() * w.asDiagonal() * x);
  };

  for (int it = 0; it < options.max_iterations; ++it) {
    const Vector p = sigmoid(Vector(x * beta));
    const Vector g = x.transpose() * (y - p);
    Vector step = hessian(beta).completeOrthogonalDecomposition().solve(g);
    if (g.norm() < options.gradient_tolerance || (step.allFinite() && g.dot(step) < options.decrement_tolerance)) {
      fit.converged = true;
      break;
    }
    if (!step.allFinite()) break;
    double scale = 1.0;
    bool accepted = false;
    Vector candidate;
    double cand_ll = ll;
    for (int k = 0; k < 50; ++k) {
      candidate = beta + scale * step;
      cand_ll = log_likelihood(x, y, candidate);
      if (cand_ll >= ll) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    fit.iterations = it + 1;
    if (!accepted) break;
    const double biggest = candidate.cwiseAbs().maxCoeff();
    if (biggest > options.weight_cap) {
      // Shorten along the accepted segment; concavity keeps the ascent.
      const Vector delta = candidate - beta;
      double lo = 0.0, hi = 1.0;
      for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        ((beta + mid * delta).cwiseAbs().maxCoeff() > options.weight_cap ? hi : lo) = mid;
      }
      beta += lo * delta;
      ll = std::max(ll, log_likelihood(x, y, beta));
      fit.log_likelihood_history.push_back(ll);
      fit.separated = true;
      break;
    }
    const bool stalled = cand_ll - ll < 1e-15 && (candidate - beta).norm() < 1e-15;
    beta = candidate;
    ll = cand_ll;
    fit.log_likelihood_history.push_back(ll);
    if (stalled) break;
  }
  if (!fit.converged && !fit.separated) {
    const Vector g = x.transpose() * (y - sigmoid(Vector(x * beta)));
    const Vector step = hessian(beta).completeOrthogonalDecomposition().solve(g);
    fit.converged = g.norm() < options.gradient_tolerance || g.dot(step) < options.decrement_tolerance;
  }
  if (!beta.allFinite()) throw NonFiniteError("choice model fit diverged");

  fit.beta = beta;
  fit.log_likelihood = ll;
  const Matrix cov = hessian(beta).completeOrthogonalDecomposition().pseudoInverse();
  fit.std_error = Vector(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const bool informative = x.col(j).cwiseAbs().maxCoeff() > 0.0;
    fit.std_error[j] = informative ? std::sqrt(std::max(cov(j, j), 0.0)) : std::numeric_limits<double>::quiet_NaN();
  }
  return fit;
}

ChoiceModelFit fit_choice_model(const std::vector<ChoiceEpisode>& episodes, const ChoiceFitOptions& options) {
  if (episodes.size() < 100) throw std::invalid_argument("choice model needs at least 100 episodes");
  std::vector<int> y(episodes.size());
  for (std::size_t i = 0; i < episodes.size(); ++i) y[i] = episodes[i].action == 0 ? 1 : 0;
  return fit_logistic(choice_predictors(episodes), y, options);
}

void check_stamps(const std::vector<FileStamp>& stamps, bool force) {
  if (force || stamps.empty()) return;
  for (const auto& s : stamps) {
    if (s.config_hash != stamps.front().config_hash)
      throw std::runtime_error("refusing to merge files with different config hashes (" + stamps.front().config_hash +
                               " vs " + s.config_hash + "); pass --force to override");
  }
}

void write_training_curve_csv(std::ostream& out, const FileStamp& stamp, const std::vector<EpisodeMetrics>& metrics) {
  struct Acc {
    std::size_t n = 0;
    double ret = 0, pl = 0, vl = 0, ent = 0, rg = 0;
  };
  std::map<std::size_t, Acc> by_epoch;
  for (const auto& m : metrics) {
    auto& a = by_epoch[m.epoch];
    a.n += 1;
    a.ret += m.episode_return;
    a.pl += m.policy_loss;
    a.vl += m.value_loss;
    a.ent += m.entropy;
    a.rg += m.mean_rgate;
  }
  out << format_stamp(stamp) << '\n'
      << "epoch,episodes,mean_return,mean_policy_loss,mean_value_loss,mean_entropy,mean_rgate\n";
  for (const auto& [epoch, a] : by_epoch) {
    const double n = static_cast<double>(a.n);
    out << epoch << ',' << a.n << ',' << format_number(a.ret / n) << ',' << format_number(a.pl / n) << ','
        << format_number(a.vl / n) << ',' << format_number(a.ent / n) << ',' << format_number(a.rg / n) << '\n';
  }
}

void write_regret_csv(std::ostream& out, const FileStamp& stamp, const std::vector<RegretCurve>& curves) {
  out << format_stamp(stamp) << '\n' << "exposure,trial,episodes,mean_cumulative_regret\n";
  for (const auto& c : curves)
    for (std::size_t t = 0; t < c.mean_cumulative.size(); ++t)
      out << c.exposure << ',' << t + 1 << ',' << c.episodes << ',' << format_number(c.mean_cumulative[t]) << '\n';
}

void write_maze_steps_csv(std::ostream& out, const FileStamp& stamp, const std::vector<MazeStepsSummary>& rows) {
  out << format_stamp(stamp) << '\n' << "exposure,measure,n,censored,mean_steps,ci_low,ci_high,mean_optimal\n";
  for (const auto& r : rows)
    out << r.exposure << ',' << r.measure << ',' << r.steps.n << ',' << r.censored << ','
        << format_number(r.steps.mean) << ',' << format_number(r.steps.low) << ',' << format_number(r.steps.high)
        << ',' << format_number(r.mean_optimal) << '\n';
}

void write_rgate_csv(std::ostream& out, const FileStamp& stamp, const std::vector<RgatePoint>& points) {
  out << format_stamp(stamp) << '\n' << "stage,cued,step,n,mean_rgate\n";
  for (const auto& p : points)
    out << p.stage << ',' << (p.cued ? 1 : 0) << ',' << p.step << ',' << p.n << ',' << format_number(p.mean) << '\n';
}

void write_rgate_test_csv(std::ostream& out, const FileStamp& stamp, const std::vector<double>& cued,
                          const std::vector<double>& uncued) {
  const auto t = welch_ttest(cued, uncued);
  out << format_stamp(stamp) << '\n' << "n_cued,n_uncued,mean_cued,mean_uncued,t,df,p,valid\n";
  out << cued.size() << ',' << uncued.size() << ',' << format_number(mean_of(cued)) << ','
      << format_number(mean_of(uncued)) << ',' << format_number(t.t) << ',' << format_number(t.df) << ','
      << format_number(t.p) << ',' << (t.valid ? 1 : 0) << '\n';
}

void write_choice_fit_csv(std::ostream& out, const FileStamp& stamp, const std::vector<NamedFit>& fits) {
  out << format_stamp(stamp) << '\n'
      << "subset,term,estimate,std_error,log_likelihood,n,converged,separated\n";
  for (const auto& nf : fits) {
    for (int j = 0; j < kChoiceTerms; ++j)
      out << nf.subset << ',' << kChoiceTermNames[j] << ',' << format_number(nf.fit.beta[j]) << ','
          << format_number(nf.fit.std_error[j]) << ',' << format_number(nf.fit.log_likelihood) << ',' << nf.fit.n
          << ',' << (nf.fit.converged ? 1 : 0) << ',' << (nf.fit.separated ? 1 : 0) << '\n';
  }
}

}  // namespace emrl
