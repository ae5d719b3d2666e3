#include "emrl/run.hpp"

#include "emrl/analysis.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

namespace emrl {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

FileStamp stamp_of(const ExperimentConfig& c) { return {config_hash(c), c.train.seed}; }

void write_config_snapshot(const ExperimentConfig& c, const fs::path& dir) {
  auto out = open_out(dir / "config.ini");
  out << format_stamp(stamp_of(c)) << '\n' << serialize_config(c);
}

void write_metrics(const fs::path& path, const FileStamp& stamp, const std::vector<EpisodeMetrics>& metrics) {
  auto out = open_out(path);
  write_metrics_header(out, stamp);
  for (const auto& m : metrics) write_metrics_row(out, m);
}

void write_steps(const fs::path& path, const FileStamp& stamp, const std::vector<TrajectoryStep>& steps) {
  auto out = open_out(path);
  write_steps_csv(out, stamp, steps);
}

std::uint64_t eval_seed(const ExperimentConfig& c) { return c.train.seed * 1000003ULL + 17; }

int evaluate_and_report(const Trainer& trainer, const ExperimentConfig& c, const fs::path& dir, std::ostream& log) {
  const FileStamp stamp = stamp_of(c);
  const auto ev = trainer.evaluate(c.eval_epochs, eval_seed(c), c.eval_greedy);
  if (ev.fingerprint_before != ev.fingerprint_after) {
    log << "error: parameters changed during evaluation\n";
    return 1;
  }
  write_steps(dir / "eval_steps.csv", stamp, ev.steps);
  write_metrics(dir / "eval_metrics.csv", stamp, ev.metrics);
  log << "eval: " << ev.metrics.size() << " episodes, mean return " << format_number(ev.mean_return)
      << ", parameter fingerprint " << hex64(ev.fingerprint_after) << " (unchanged)\n";
  AnalyzeOptions a;
  a.step_files = {(dir / "eval_steps.csv").string()};
  a.out_dir = (dir / "analysis").string();
  a.maze_horizon = c.task.env.maze_horizon;
  return run_analyze(a, log);
}

}  // namespace

int run_train(const ExperimentConfig& config, std::ostream& log) {
  const fs::path dir(config.out_dir);
  const FileStamp stamp = stamp_of(config);
  write_config_snapshot(config, dir);
  Trainer trainer(config.task,
                  initial_agent_params(config.task, config.variant, config.hidden, config.train.seed, config.dnd_k,
                                       config.kernel_delta),
                  config.train);
  {
    auto metrics = open_out(dir / "metrics.csv");
    write_metrics_header(metrics, stamp);
    std::ofstream curve;
    if (config.train.eval_every > 0) {
      curve = open_out(dir / "eval_curve.csv");
      curve << format_stamp(stamp) << '\n' << "epoch,episodes,mean_return\n";
    }
    trainer.train([&](const EpisodeMetrics& m) { write_metrics_row(metrics, m); },
                  [&](std::size_t epoch, const EvalResult& ev) {
                    curve << epoch << ',' << ev.metrics.size() << ',' << format_number(ev.mean_return) << '\n';
                  });
  }
  log << "trained " << config.train.train_epochs << " epochs x " << config.train.batch_size << " workers ("
      << trainer.skipped_updates() << " updates skipped)\n";
  {
    auto ck = open_out(dir / "checkpoint.json");
    trainer.params().save(ck, stamp.config_hash);
  }
  AnalyzeOptions a;
  a.metric_files = {(dir / "metrics.csv").string()};
  a.out_dir = (dir / "analysis").string();
  if (const int rc = run_analyze(a, log); rc != kExitOk) return rc;
  return evaluate_and_report(trainer, config, dir, log);
}

int run_eval(const ExperimentConfig& config, const std::string& checkpoint, std::ostream& log) {
  std::ifstream in(checkpoint);
  if (!in) {
    log << "error: cannot open checkpoint " << checkpoint << '\n';
    return kExitUsage;
  }
  AgentParams params = AgentParams::load(in);
  const auto env = make_environment(config.task.env);
  if (params.shape.n_actions != env->n_actions() || params.shape.observation_dim != env->observation_dim() ||
      (params.shape.variant == AgentVariant::L2rlContext && params.shape.context_dim != env->context_input_dim()) ||
      (params.shape.variant == AgentVariant::EpL2rl && params.shape.key_dim != env->query_dim())) {
    log << "error: checkpoint does not fit the configured environment\n";
    return kExitUsage;
  }
  const fs::path dir(config.out_dir);
  write_config_snapshot(config, dir);
  Trainer trainer(config.task, std::move(params), config.train);
  const std::uint64_t before = trainer.params().fingerprint();
  const int rc = evaluate_and_report(trainer, config, dir, log);
  if (trainer.params().fingerprint() != before) {
    log << "error: checkpoint parameters changed\n";
    return 1;
  }
  return rc;
}

int run_baselines(const ExperimentConfig& config, const std::vector<BaselinePolicy>& policies, std::size_t epochs,
                  std::ostream& log) {
  const fs::path dir(config.out_dir);
  const FileStamp stamp = stamp_of(config);
  write_config_snapshot(config, dir);
  for (const auto policy : policies) {
    const std::string name(to_string(policy));
    const auto run = run_baseline(policy, config.task, epochs, config.train.seed);
    write_steps(dir / ("baseline_" + name + "_steps.csv"), stamp, run.steps);
    write_metrics(dir / ("baseline_" + name + "_metrics.csv"), stamp, run.metrics);
    const auto curves = regret_by_exposure(run.steps);
    auto out = open_out(dir / "analysis" / ("baseline_" + name + "_regret_by_exposure.csv"));
    write_regret_csv(out, stamp, curves);
    double total = 0.0;
    const auto regrets = episode_regrets(run.steps);
    for (const auto& r : regrets) total += r.cumulative.back();
    log << name << ": " << regrets.size() << " episodes, mean cumulative regret "
        << format_number(total / static_cast<double>(regrets.size())) << '\n';
  }
  return kExitOk;
}

std::vector<TrajectoryStep> load_step_logs(const std::vector<std::string>& paths, bool force, FileStamp* stamp) {
  std::vector<TrajectoryStep> all;
  std::vector<FileStamp> stamps;
  std::size_t offset = 0;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    FileStamp s;
    auto steps = read_steps_csv(in, &s);
    stamps.push_back(s);
    std::size_t max_epoch = 0;
    for (auto& st : steps) {
      max_epoch = std::max(max_epoch, st.epoch);
      st.epoch += offset;
    }
    if (!steps.empty()) offset += max_epoch + 1;
    all.insert(all.end(), steps.begin(), steps.end());
  }
  check_stamps(stamps, force);
  if (stamp && !stamps.empty()) *stamp = stamps.front();
  return all;
}

int run_analyze(const AnalyzeOptions& o, std::ostream& log) {
  const fs::path dir(o.out_dir);
  if (!o.metric_files.empty()) {
    std::vector<EpisodeMetrics> metrics;
    std::vector<FileStamp> stamps;
    for (const auto& path : o.metric_files) {
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot read " + path);
      FileStamp s;
      auto m = read_metrics_csv(in, &s);
      stamps.push_back(s);
      metrics.insert(metrics.end(), m.begin(), m.end());
    }
    check_stamps(stamps, o.force);
    auto out = open_out(dir / "training_curve.csv");
    write_training_curve_csv(out, stamps.front(), metrics);
  }
  if (o.step_files.empty()) return kExitOk;

  FileStamp stamp;
  const auto steps = load_step_logs(o.step_files, o.force, &stamp);
  if (steps.empty()) {
    log << "analyze: no steps\n";
    return kExitOk;
  }
  const bool two_step = steps.front().stage > 0;
  const bool maze = !two_step && steps.front().position >= 0;
  if (two_step) {
    auto out = open_out(dir / "rgate_timecourse.csv");
    write_rgate_csv(out, stamp, rgate_timecourse(steps));
    std::vector<double> cued, uncued;
    rgate_by_cue(steps, cued, uncued);
    auto test = open_out(dir / "rgate_ttest.csv");
    write_rgate_test_csv(test, stamp, cued, uncued);

    const auto episodes = choice_episodes(steps);
    std::vector<NamedFit> fits;
    // Subsets keep the predictors computed on the full sequence.
    if (episodes.size() >= 100) {
      const Matrix x = choice_predictors(episodes);
      std::vector<int> y(episodes.size());
      for (std::size_t i = 0; i < episodes.size(); ++i) y[i] = episodes[i].action == 0 ? 1 : 0;
      fits.push_back({"all", fit_logistic(x, y)});
      for (const bool want_cued : {false, true}) {
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < episodes.size(); ++i)
          if (episodes[i].cued == want_cued) rows.push_back(static_cast<Eigen::Index>(i));
        if (rows.size() < 100) continue;
        Matrix xs(static_cast<Eigen::Index>(rows.size()), x.cols());
        std::vector<int> ys(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
          xs.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
          ys[r] = y[static_cast<std::size_t>(rows[r])];
        }
        fits.push_back({want_cued ? "cued" : "uncued", fit_logistic(xs, ys)});
      }
    } else {
      log << "analyze: choice fit 'all' skipped (" << episodes.size() << " episodes)\n";
    }
    auto cf = open_out(dir / "choice_fit.csv");
    write_choice_fit_csv(cf, stamp, fits);
    log << "analyze: r-gate cued " << format_number(mean_of(cued)) << " vs uncued " << format_number(mean_of(uncued))
        << "\n";
  } else if (maze) {
    auto out = open_out(dir / "maze_steps.csv");
    write_maze_steps_csv(out, stamp, steps_to_goal_by_exposure(steps, o.maze_horizon));
  } else {
    std::vector<std::string> warnings;
    const auto curves = regret_by_exposure(steps, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << '\n';
    auto out = open_out(dir / "regret_by_exposure.csv");
    write_regret_csv(out, stamp, curves);
  }
  return kExitOk;
}

int run_urn_demo(double alpha, std::size_t draws, std::uint64_t seed, const std::string& out_dir, std::ostream& log) {
  if (!(alpha > 0)) {
    log << "error: alpha must be positive\n";
    return kExitUsage;
  }
  Rng rng(seed);
  UrnState urn(alpha);
  std::size_t next_id = 0, fresh = 0;
  const TaskSampler base = [&](Rng&) {
    TaskSpec t;
    t.task_id = next_id++;
    return t;
  };
  const fs::path dir(out_dir);
  auto out = open_out(dir / "urn_demo.csv");
  out << format_stamp({hex64(fnv1a("urn-demo alpha=" + format_number(alpha))), seed}) << '\n'
      << "draw,fresh,task_id,distinct_tasks,empirical_fresh_rate,predicted_fresh_prob\n";
  for (std::size_t i = 0; i < draws; ++i) {
    const double predicted = fresh_draw_probability(urn);
    const auto d = urn_draw(urn, base, rng);
    fresh += d.fresh ? 1 : 0;
    out << i << ',' << (d.fresh ? 1 : 0) << ',' << d.task.task_id << ',' << next_id << ','
        << format_number(static_cast<double>(fresh) / static_cast<double>(i + 1)) << ',' << format_number(predicted)
        << '\n';
  }
  log << "urn: " << draws << " draws, " << next_id << " distinct tasks\n";
  return kExitOk;
}

}  // namespace emrl
