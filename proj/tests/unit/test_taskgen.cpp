#include "emrl/taskgen.hpp"

#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

using namespace emrl;

namespace {

TaskSampler counter_sampler(std::size_t& next) {
  return [&next](Rng&) {
    TaskSpec t;
    t.task_id = next++;
    return t;
  };
}

}  // namespace

TEST_CASE("urn fresh-draw probability is alpha / (alpha + n)") {
  UrnState urn(2.0);
  CHECK(fresh_draw_probability(urn) == 1.0);
  std::size_t next = 0;
  Rng rng(1);
  for (int i = 0; i < 6; ++i) urn_draw(urn, counter_sampler(next), rng);
  CHECK(fresh_draw_probability(urn) == doctest::Approx(2.0 / 8.0));
  CHECK(urn.drawn.size() == 6);
  CHECK_THROWS(UrnState(0.0));
}

TEST_CASE("empirical fresh-draw frequency matches within three standard errors") {
  for (double alpha : {0.5, 1.0, 5.0}) {
    for (std::size_t n : {1u, 4u, 20u}) {
      Rng rng(static_cast<std::uint64_t>(alpha * 100) + n);
      std::size_t next = 0;
      UrnState base(alpha);
      for (std::size_t i = 0; i < n; ++i) urn_draw(base, counter_sampler(next), rng);
      const double p = alpha / (alpha + static_cast<double>(n));
      const int draws = 10000;
      int fresh = 0;
      for (int d = 0; d < draws; ++d) {
        UrnState copy = base;
        std::size_t id = next;
        fresh += urn_draw(copy, counter_sampler(id), rng).fresh ? 1 : 0;
      }
      const double se = std::sqrt(p * (1 - p) / draws);
      CAPTURE(alpha);
      CAPTURE(n);
      CHECK(std::abs(fresh / double(draws) - p) <= 3 * se);
    }
  }
}

TEST_CASE("repeat draws copy an earlier task uniformly") {
  Rng rng(3);
  std::size_t next = 0;
  UrnState base(1e-9);  // never fresh after the first draw
  urn_draw(base, counter_sampler(next), rng);
  urn_draw(base, counter_sampler(next), rng);
  CHECK(next == 1);
  CHECK(base.drawn[1].task_id == base.drawn[0].task_id);
}

TEST_CASE("barcodes are binary and unique") {
  Rng rng(1);
  const auto codes = sample_unique_barcodes(8, 200, rng);
  std::set<std::vector<double>> seen;
  for (const auto& c : codes) {
    CHECK(c.size() == 8);
    CHECK(((c.array() == 0.0) || (c.array() == 1.0)).all());
    seen.insert(std::vector<double>(c.data(), c.data() + c.size()));
  }
  CHECK(seen.size() == 200);
  CHECK_THROWS(sample_unique_barcodes(3, 9, rng));
  CHECK_NOTHROW(sample_unique_barcodes(3, 8, rng));
}

TEST_CASE("class instances are unit norm and collapse to the prototype without noise") {
  Rng rng(2);
  const Vector proto = random_unit_vector(128, rng);
  CHECK(proto.norm() == doctest::Approx(1.0));
  CHECK(sample_class_instance(proto, 0.0, rng) == proto);
  const Vector inst = sample_class_instance(proto, 0.1, rng);
  CHECK(inst.norm() == doctest::Approx(1.0));
  CHECK(inst.dot(proto) > 0.5);
}

TEST_CASE("barcode epoch: every context shown `duplicates` times with counted exposures") {
  EpochOptions o;
  o.n_unique_contexts = 10;
  o.duplicates = 10;
  o.n_positions = 10;
  Rng rng(11);
  const auto plan = build_epoch(o, rng);
  CHECK(plan.episodes.size() == 100);
  std::map<std::size_t, std::size_t> seen;
  std::set<int> targets;
  for (const auto& ep : plan.episodes) {
    const auto t = ep.tasks.at(0);
    CHECK(ep.exposures.at(0) == seen[t]);
    seen[t] += 1;
    CHECK(ep.contexts.at(0) == plan.tasks[t].context);
  }
  for (const auto& [t, count] : seen) CHECK(count == 10);
  for (const auto& t : plan.tasks) {
    targets.insert(t.mdp.target);
    int high = 0;
    for (double p : t.mdp.arm_probs) high += p == 0.9 ? 1 : 0;
    CHECK(high == 1);
    CHECK(t.mdp.arm_probs[t.mdp.target] == 0.9);
  }
  CHECK(targets.size() == 10);
}

TEST_CASE("coverage holds whenever there are more contexts than positions") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    EpochOptions o;
    o.kind = EnvKind::WaterMaze;
    o.n_unique_contexts = 16;
    o.duplicates = 2;
    o.n_positions = 16;
    Rng rng(seed);
    const auto plan = build_epoch(o, rng);
    std::set<int> goals;
    for (const auto& t : plan.tasks) goals.insert(t.mdp.target);
    CHECK(goals.size() == 16);
  }
  EpochOptions bad;
  bad.n_unique_contexts = 3;
  bad.n_positions = 5;
  Rng rng(1);
  CHECK_THROWS(build_epoch(bad, rng));
}

TEST_CASE("mapping is reshuffled between epochs and reproducible from the seed") {
  EpochOptions o;
  Rng a(5), b(5);
  const auto p1 = build_epoch(o, a);
  const auto p2 = build_epoch(o, a);
  const auto q1 = build_epoch(o, b);
  CHECK(p1.mapping_seed == q1.mapping_seed);
  CHECK(p1.tasks[0].context == q1.tasks[0].context);
  CHECK(p1.mapping_seed != p2.mapping_seed);
}

TEST_CASE("class-bandit contexts vary per showing") {
  EpochOptions o;
  o.kind = EnvKind::ClassBandit;
  o.class_dim = 16;
  Rng rng(4);
  const auto plan = build_epoch(o, rng);
  std::map<std::size_t, std::vector<Vector>> shown;
  for (const auto& ep : plan.episodes) shown[ep.tasks[0]].push_back(ep.contexts[0]);
  for (const auto& [t, ctxs] : shown) {
    CHECK(ctxs.size() == 10);
    CHECK(ctxs[0] != ctxs[1]);
    CHECK(ctxs[0].dot(ctxs[1]) > 0.5);
  }
}

TEST_CASE("compositional epoch pairs one high and one low stimulus per episode") {
  EpochOptions o;
  o.kind = EnvKind::CompositionalBandit;
  o.n_unique_contexts = 40;
  o.duplicates = 5;
  o.n_positions = 2;
  o.class_dim = 8;
  Rng rng(6);
  const auto plan = build_epoch(o, rng);
  CHECK(plan.episodes.size() == 100);
  std::map<std::size_t, std::size_t> count;
  for (const auto& ep : plan.episodes) {
    REQUIRE(ep.tasks.size() == 2);
    CHECK(plan.tasks[ep.tasks[0]].mdp.arm_probs[0] == 0.9);
    CHECK(plan.tasks[ep.tasks[1]].mdp.arm_probs[0] == 0.1);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(ep.exposures[j] == count[ep.tasks[j]]);
      count[ep.tasks[j]] += 1;
    }
  }
  for (const auto& [t, c] : count) CHECK(c == 5);
}

TEST_CASE("epoch plans round-trip through JSON") {
  EpochOptions o;
  o.n_unique_contexts = 6;
  o.duplicates = 3;
  o.n_positions = 5;
  Rng rng(8);
  const auto plan = build_epoch(o, rng);
  std::stringstream ss;
  save_epoch_plan(plan, ss);
  const auto back = load_epoch_plan(ss);
  REQUIRE(back.episodes.size() == plan.episodes.size());
  CHECK(back.mapping_seed == plan.mapping_seed);
  for (std::size_t i = 0; i < plan.episodes.size(); ++i) {
    CHECK(back.episodes[i].tasks == plan.episodes[i].tasks);
    CHECK(back.episodes[i].contexts[0] == plan.episodes[i].contexts[0]);
  }
  CHECK(back.tasks[2].mdp.arm_probs == plan.tasks[2].mdp.arm_probs);
}

TEST_CASE("two-step epochs are not built here") {
  EpochOptions o;
  o.kind = EnvKind::TwoStep;
  Rng rng(1);
  CHECK_THROWS(build_epoch(o, rng));
}
