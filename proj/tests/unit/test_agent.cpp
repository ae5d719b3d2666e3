#include "emrl/agent.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace emrl;

namespace {

AgentShape shape_for(AgentVariant v) {
  AgentShape s;
  s.variant = v;
  s.n_actions = 3;
  s.observation_dim = 2;
  s.context_dim = 4;
  s.key_dim = 4;
  s.hidden = 6;
  s.key_encoding = KeyEncoding::Bipolar;
  return s;
}

AgentInput input_for(const AgentShape& s, Rng& rng) {
  AgentInput in;
  in.prev_action_onehot = Vector::Zero(s.n_actions);
  in.prev_action_onehot[static_cast<Eigen::Index>(uniform_index(s.n_actions, rng))] = 1.0;
  in.prev_reward = 1.0;
  in.observation = Vector::Random(s.observation_dim);
  in.context = Vector::Ones(s.context_dim);
  return in;
}

}  // namespace

TEST_CASE("input width counts action one-hot, reward, observation and optional context") {
  CHECK(shape_for(AgentVariant::L2rl).input_dim() == 3 + 1 + 2);
  CHECK(shape_for(AgentVariant::EpL2rl).input_dim() == 3 + 1 + 2);
  CHECK(shape_for(AgentVariant::L2rlContext).input_dim() == 3 + 1 + 2 + 4);
  Rng rng(1);
  const auto params = AgentParams::random(shape_for(AgentVariant::L2rlContext), rng);
  Agent agent(&params);
  const auto in = input_for(params.shape, rng);
  const Vector x = agent.build_input(in);
  CHECK(x.size() == params.shape.input_dim());
  CHECK(x.tail(4) == in.context);
}

TEST_CASE("act produces a normalized policy and consistent log-probability") {
  Rng rng(2);
  for (auto v : {AgentVariant::L2rl, AgentVariant::L2rlContext, AgentVariant::EpL2rl}) {
    const auto params = AgentParams::random(shape_for(v), rng);
    Agent agent(&params);
    const auto rec = agent.act(input_for(params.shape, rng), Vector::Ones(4), rng);
    CHECK(rec.probs.size() == 3);
    CHECK(rec.probs.sum() == doctest::Approx(1.0));
    CHECK((rec.probs.array() > 0).all());
    CHECK(rec.log_prob == doctest::Approx(std::log(rec.probs[rec.action])));
    CHECK(rec.h.size() == 6);
    CHECK(rec.r_gate.size() == 6);
  }
}

TEST_CASE("baselines never touch the DND") {
  Rng rng(3);
  for (auto v : {AgentVariant::L2rl, AgentVariant::L2rlContext}) {
    const auto params = AgentParams::random(shape_for(v), rng);
    Agent agent(&params);
    for (int t = 0; t < 5; ++t) agent.act(input_for(params.shape, rng), Vector::Ones(4), rng);
    agent.end_episode({Vector::Ones(4)});
    CHECK(agent.memory().size() == 0);
    CHECK(agent.dnd_reads() == 0);
  }
}

TEST_CASE("epL2RL stores its cell state under the encoded key and reads it back") {
  Rng rng(4);
  const auto params = AgentParams::random(shape_for(AgentVariant::EpL2rl), rng);
  Agent agent(&params);
  const Vector context = (Vector(4) << 1, 0, 0, 1).finished();
  for (int t = 0; t < 4; ++t) agent.act(input_for(params.shape, rng), context, rng);
  const Vector stored = agent.state().c;
  agent.end_episode({context});
  CHECK(agent.state().c.isZero());
  CHECK(agent.state().h.isZero());
  REQUIRE(agent.memory().size() == 1);
  CHECK(agent.memory().entries()[0].key == agent.encode_key(context));
  CHECK(agent.memory().read(agent.encode_key(context)) == stored);
  CHECK(agent.dnd_reads() == 4);

  // writing mid-episode keeps the recurrent state
  agent.act(input_for(params.shape, rng), context, rng);
  const Vector c = agent.state().c;
  agent.write_memory({(Vector(4) << 0, 1, 1, 0).finished()});
  CHECK(agent.state().c == c);
  CHECK(agent.memory().size() == 2);

  agent.end_epoch();
  CHECK(agent.memory().empty());
}

TEST_CASE("bipolar keys map zero barcodes away from the origin") {
  Rng rng(5);
  const auto params = AgentParams::random(shape_for(AgentVariant::EpL2rl), rng);
  Agent agent(&params);
  CHECK(agent.encode_key(Vector::Zero(4)) == Vector::Constant(4, -1.0));
  CHECK(agent.encode_key(Vector::Ones(4)) == Vector::Ones(4));
}

TEST_CASE("greedy picks the argmax; sampling follows the policy") {
  Rng rng(6);
  auto params = AgentParams::random(shape_for(AgentVariant::L2rl), rng);
  params.heads.policy_w.setZero();
  params.heads.policy_b = (Vector(3) << 0.0, std::log(2.0), std::log(5.0)).finished();
  Agent agent(&params);
  const auto in = input_for(params.shape, rng);
  CHECK(agent.act(in, std::nullopt, rng, true).action == 2);
  std::array<int, 3> counts{};
  const int n = 40000;
  for (int i = 0; i < n; ++i) counts[agent.act(in, std::nullopt, rng).action] += 1;
  const double expect[3] = {0.125, 0.25, 0.625};
  for (int a = 0; a < 3; ++a)
    CHECK(std::abs(counts[a] / double(n) - expect[a]) < 4 * std::sqrt(expect[a] * (1 - expect[a]) / n));
}

TEST_CASE("softmax is stable for large logits") {
  const Vector p = softmax((Vector(3) << 1000.0, 1000.0, -1000.0).finished());
  CHECK(p.allFinite());
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[2] == doctest::Approx(0.0));
}

TEST_CASE("parameters flatten, assign and checkpoint losslessly") {
  Rng rng(7);
  const auto params = AgentParams::random(shape_for(AgentVariant::EpL2rl), rng);
  const Vector flat = params.flatten();
  CHECK(static_cast<std::size_t>(flat.size()) == params.parameter_count());

  auto copy = AgentParams::zeros_like(params);
  CHECK(copy.flatten().isZero());
  copy.assign(flat);
  CHECK(copy.flatten() == flat);
  CHECK(copy.fingerprint() == params.fingerprint());
  CHECK_THROWS(copy.assign(Vector::Zero(flat.size() - 1)));

  std::stringstream ss;
  params.save(ss, "abc");
  const auto loaded = AgentParams::load(ss);
  CHECK(loaded.flatten() == flat);
  CHECK(loaded.fingerprint() == params.fingerprint());
  CHECK(loaded.shape.variant == params.shape.variant);
  CHECK(loaded.shape.key_encoding == params.shape.key_encoding);
  CHECK(loaded.shape.hidden == params.shape.hidden);

  auto changed = params;
  Vector f = flat;
  f[0] += 1e-12;
  changed.assign(f);
  CHECK(changed.fingerprint() != params.fingerprint());
}

TEST_CASE("variant names round-trip") {
  for (auto v : {AgentVariant::L2rl, AgentVariant::L2rlContext, AgentVariant::EpL2rl})
    CHECK(agent_variant_from_string(to_string(v)) == v);
  CHECK_THROWS(agent_variant_from_string("lstm"));
}
