#include "emrl/envs.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace emrl;

namespace {

BanditTask ten_arm(int best) {
  BanditTask t;
  t.arm_probs.assign(10, 0.1);
  t.arm_probs[best] = 0.9;
  return t;
}

double mean_return(const BanditTask& task, const std::function<int(Rng&)>& policy, int episodes, Rng& rng) {
  double total = 0.0;
  for (int e = 0; e < episodes; ++e)
    for (int t = 0; t < task.trials; ++t) total += bandit_step(task, t, policy(rng), rng).reward;
  return total / episodes;
}

}  // namespace

TEST_CASE("bandit returns: best arm 9, bad arm 1, uniform random 1.8") {
  Rng rng(1);
  const auto task = ten_arm(3);
  const int n = 20000;
  // Per-episode return sd is at most sqrt(10 * 0.25); 4 standard errors.
  const double tol = 4 * std::sqrt(2.5 / n);
  CHECK(std::abs(mean_return(task, [](Rng&) { return 3; }, n, rng) - 9.0) < tol);
  CHECK(std::abs(mean_return(task, [](Rng&) { return 0; }, n, rng) - 1.0) < tol);
  const double random_return = (0.9 + 9 * 0.1) / 10 * 10;
  CHECK(std::abs(mean_return(task, [](Rng& r) { return static_cast<int>(uniform_index(10, r)); }, n, rng) -
                 random_return) < tol);
}

TEST_CASE("bandit arm marginals lie within three sigma over 100k pulls") {
  Rng rng(2);
  BanditTask t;
  t.arm_probs = {0.1, 0.9, 0.35};
  t.trials = 1;
  for (int arm = 0; arm < 3; ++arm) {
    double s = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) s += bandit_step(t, 0, arm, rng).reward;
    const double p = t.arm_probs[arm];
    CHECK(std::abs(s / n - p) <= 3 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("bandit rejects bad actions and ends after the last trial") {
  Rng rng(3);
  const auto task = ten_arm(0);
  CHECK_THROWS_AS(bandit_step(task, 0, 10, rng), std::out_of_range);
  CHECK_THROWS_AS(bandit_step(task, 0, -1, rng), std::out_of_range);
  CHECK_FALSE(bandit_step(task, 8, 0, rng).done);
  CHECK(bandit_step(task, 9, 0, rng).done);
  CHECK_THROWS(bandit_step(task, 10, 0, rng));
}

TEST_CASE("compositional: following the high stimulus earns 9, a fixed position earns 5") {
  Rng rng(4);
  CompositionalTask base;
  base.probs = {0.9, 0.1};
  base.stimuli = {Vector::Unit(3, 0), Vector::Unit(3, 1)};
  const int n = 20000;
  double follow = 0.0, fixed = 0.0;
  for (int e = 0; e < n; ++e) {
    auto a = base, b = base;
    a.stimulus_at_position0 = static_cast<int>(uniform_index(2, rng));
    b.stimulus_at_position0 = static_cast<int>(uniform_index(2, rng));
    for (int t = 0; t < 10; ++t) {
      follow += compositional_step(a, t, a.stimulus_at(0) == 0 ? 0 : 1, rng).reward;
      fixed += compositional_step(b, t, 0, rng).reward;
    }
  }
  const double tol = 4 * std::sqrt(2.5 / n);
  CHECK(std::abs(follow / n - 9.0) < tol);
  CHECK(std::abs(fixed / n - 5.0) < tol);
}

TEST_CASE("compositional observation lists stimuli in position order") {
  CompositionalTask t;
  t.stimuli = {Vector::Constant(2, 1.0), Vector::Constant(2, 2.0)};
  t.stimulus_at_position0 = 1;
  const Vector obs = t.observation();
  CHECK(obs.head(2) == t.stimuli[1]);
  CHECK(obs.tail(2) == t.stimuli[0]);
}

TEST_CASE("maze moves, walls and goal respawn") {
  Rng rng(5);
  MazeTask task{maze_cell(1, 0), Vector(), kMazeHorizon};
  // adjacent goal, correct action
  auto o = maze_step(task, maze_cell(0, 0), static_cast<int>(MazeAction::Right), 0, rng);
  CHECK(o.reward == 1.0);
  CHECK(o.respawned);
  CHECK(o.position != task.goal);
  // wall bump at the corner
  o = maze_step(task, maze_cell(0, 3), static_cast<int>(MazeAction::Left), 0, rng);
  CHECK(o.position == maze_cell(0, 3));
  CHECK(o.reward == 0.0);
  o = maze_step(task, maze_cell(0, 3), static_cast<int>(MazeAction::Down), 0, rng);
  CHECK(o.position == maze_cell(0, 3));
  CHECK(maze_step(task, maze_cell(3, 3), 0, kMazeHorizon - 1, rng).done);
  CHECK_THROWS(maze_step(task, 0, 4, 0, rng));
}

TEST_CASE("respawns are uniform over the non-goal cells") {
  Rng rng(6);
  std::vector<int> hits(kMazeCells, 0);
  const int n = 150000;
  for (int i = 0; i < n; ++i) hits[maze_random_start(5, rng)] += 1;
  CHECK(hits[5] == 0);
  const double p = 1.0 / 15;
  for (int c = 0; c < kMazeCells; ++c)
    if (c != 5) CHECK(std::abs(hits[c] / double(n) - p) < 4 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("shortest paths agree with BFS and stay within 6 steps") {
  double total = 0.0;
  int pairs = 0;
  for (int a = 0; a < kMazeCells; ++a) {
    for (int b = 0; b < kMazeCells; ++b) {
      const int bfs = oracle::grid_bfs(a, b);
      CHECK(maze_shortest_path(a, b) == bfs);
      CHECK(bfs <= 6);
      if (a != b) {
        total += bfs;
        ++pairs;
      }
    }
  }
  // mean over distinct start/goal pairs: 2 * E|dx| * 256 / 240
  CHECK(total / pairs == doctest::Approx(8.0 / 3.0));
  CHECK(maze_shortest_path(maze_cell(0, 0), maze_cell(3, 3)) == 6);
}

TEST_CASE("maze coordinates are one-hot x then one-hot y") {
  const Vector v = maze_coordinates(maze_cell(2, 1));
  CHECK(v.size() == 8);
  CHECK(v.sum() == 2.0);
  CHECK(v[2] == 1.0);
  CHECK(v[4 + 1] == 1.0);
}

TEST_CASE("cued traversal reaching the archived state repeats the archived reward exactly") {
  Rng rng(7);
  for (double archived : {0.0, 1.0}) {
    TwoStepArchive archive{{0, 1, true, archived, false, std::nullopt, Vector::Zero(4)}};
    int matched = 0;
    for (int i = 0; i < 2000; ++i) {
      // the live probabilities say the opposite of the archive
      TwoStepTask task({archived > 0 ? 0.0 : 1.0, archived > 0 ? 0.0 : 1.0}, 0, Vector::Ones(4), archive);
      const auto out = twostep_step(task, 1, 1, rng, archive);
      if (task.state == 1) {
        ++matched;
        REQUIRE(out.reward == archived);
      } else {
        REQUIRE(out.reward == (archived > 0 ? 0.0 : 1.0));
      }
      archive.resize(1);
    }
    CHECK(matched > 0);
  }
}

TEST_CASE("two-step transitions are common with probability 0.8 and reversals happen 10% of the time") {
  Rng rng(8);
  TwoStepArchive archive;
  std::array<double, 2> probs{0.9, 0.1};
  int common = 0, reversals = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    TwoStepTask task(probs, std::nullopt, Vector::Ones(3), archive);
    twostep_step(task, 1, i % 2, rng, archive);
    common += task.common ? 1 : 0;
    CHECK(task.state == (task.common ? i % 2 : 1 - i % 2));
    twostep_step(task, 2, 0, rng, archive);
    reversals += task.reversed ? 1 : 0;
    CHECK(((task.reward_probs[0] == 0.9 && task.reward_probs[1] == 0.1) ||
           (task.reward_probs[0] == 0.1 && task.reward_probs[1] == 0.9)));
    probs = task.reward_probs;
  }
  CHECK(std::abs(common / double(n) - 0.8) < 4 * std::sqrt(0.16 / n));
  CHECK(std::abs(reversals / double(n) - 0.10) <= 0.01);
  CHECK(archive.size() == static_cast<std::size_t>(n));
}

TEST_CASE("cue referencing a missing archive entry is rejected") {
  TwoStepArchive archive;
  CHECK_THROWS_AS(TwoStepTask({0.9, 0.1}, 0, Vector::Ones(2), archive), std::invalid_argument);
}

TEST_CASE("two-step epoch: first half uncued, second half cued to earlier traversals") {
  EnvOptions o;
  o.kind = EnvKind::TwoStep;
  auto env = make_environment(o);
  Rng rng(9);
  const auto plan = make_two_step_plan(rng);
  env->reset(plan, 0, rng);
  int traversal = 0;
  while (!env->done()) {
    const auto r1 = env->step(static_cast<int>(uniform_index(2, rng)), rng);
    CHECK(r1.info.stage == 1);
    CHECK(r1.info.cued == (traversal >= 50));
    if (r1.info.cued) CHECK(r1.info.cue_ref < traversal);
    CHECK_FALSE(r1.write_point);
    const auto r2 = env->step(0, rng);
    CHECK(r2.info.stage == 2);
    CHECK(r2.write_point);
    CHECK(r2.reward == 0.0);
    ++traversal;
  }
  CHECK(traversal == 100);
  const auto* archive = two_step_archive(*env);
  REQUIRE(archive);
  CHECK(archive->size() == 100);
}

TEST_CASE("every environment rejects a step after done") {
  for (auto kind : {EnvKind::BarcodeBandit, EnvKind::ClassBandit, EnvKind::CompositionalBandit, EnvKind::WaterMaze,
                    EnvKind::TwoStep}) {
    EnvOptions o;
    o.kind = kind;
    o.class_dim = 8;
    o.n_arms = kind == EnvKind::CompositionalBandit ? 2 : 10;
    auto env = make_environment(o);
    Rng rng(10);
    EpochPlan plan;
    if (kind == EnvKind::TwoStep) {
      plan = make_two_step_plan(rng);
    } else {
      EpochOptions eo;
      eo.kind = kind;
      eo.class_dim = 8;
      eo.n_positions = kind == EnvKind::WaterMaze ? 16 : (kind == EnvKind::CompositionalBandit ? 2 : 10);
      eo.n_unique_contexts = kind == EnvKind::CompositionalBandit ? 4 : 16;
      eo.duplicates = 2;
      plan = build_epoch(eo, rng);
    }
    env->reset(plan, 0, rng);
    int steps = 0;
    while (!env->done()) {
      env->step(0, rng);
      ++steps;
    }
    CHECK(steps == env->horizon());
    CHECK_THROWS_AS(env->step(0, rng), std::logic_error);
  }
}
