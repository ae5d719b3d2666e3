#include "emrl/eplstm.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace emrl;

TEST_CASE("analytic gradients match central differences on random 8-step problems") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    CHECK(oracle::eplstm_gradient_error(seed) < 1e-4);
  }
}

TEST_CASE("input and initial-state gradients match central differences") {
  Rng rng(3);
  const int in = 3, hid = 4, steps = 5;
  auto params = EpLstmParams::random(in, hid, rng);
  std::normal_distribution<double> n01;
  auto randn = [&](int d) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = n01(rng);
    return v;
  };
  std::vector<Vector> xs, ceps, gs;
  for (int t = 0; t < steps; ++t) {
    xs.push_back(randn(in));
    ceps.push_back(randn(hid));
    gs.push_back(randn(hid));
  }
  EpLstmState init{randn(hid), randn(hid)};
  auto loss = [&](const std::vector<Vector>& x, const EpLstmState& s0) {
    const auto u = unroll(params, x, ceps, s0);
    double l = 0.0;
    for (int t = 0; t < steps; ++t) l += gs[t].dot(u.states[t].h);
    return l;
  };
  const auto u = unroll(params, xs, ceps, init);
  const auto g = backward_through_time(params, u.caches, gs);
  const double eps = 1e-6;
  for (int t = 0; t < steps; ++t) {
    for (int i = 0; i < in; ++i) {
      auto up = xs, down = xs;
      up[t][i] += eps;
      down[t][i] -= eps;
      CHECK(g.grad_x[t][i] == doctest::Approx((loss(up, init) - loss(down, init)) / (2 * eps)).epsilon(1e-6));
    }
  }
  for (int i = 0; i < hid; ++i) {
    auto up = init, down = init;
    up.c[i] += eps;
    down.c[i] -= eps;
    CHECK(g.grad_init.c[i] == doctest::Approx((loss(xs, up) - loss(xs, down)) / (2 * eps)).epsilon(1e-6));
    up = init;
    down = init;
    up.h[i] += eps;
    down.h[i] -= eps;
    CHECK(g.grad_init.h[i] == doctest::Approx((loss(xs, up) - loss(xs, down)) / (2 * eps)).epsilon(1e-6));
  }
}

TEST_CASE("retrieved state is a constant: its gradient is reported but never enters the parameters") {
  Rng rng(5);
  auto params = EpLstmParams::random(2, 3, rng);
  const Vector x = Vector::Ones(2);
  const Vector c_ep = Vector::LinSpaced(3, -1.0, 1.0);
  const auto fwd = forward_step(params, x, EpLstmState::zeros(3), c_ep);
  const auto g = backward_step(params, fwd.cache, Vector::Ones(3), Vector::Zero(3));
  const Vector dc = fwd.cache.o.cwiseProduct((1.0 - fwd.cache.tanh_c.array().square()).matrix());
  for (int i = 0; i < 3; ++i) CHECK(g.grad_c_ep[i] == doctest::Approx(dc[i] * fwd.cache.r[i]));
  CHECK(g.param_grads.parameter_count() == params.parameter_count());
}

TEST_CASE("with no retrieved state the cell reproduces a plain LSTM bit for bit") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const int in = 1 + static_cast<int>(seed % 6), hid = 2 + static_cast<int>(seed % 7);
    auto params = EpLstmParams::random(in, hid, rng);
    std::normal_distribution<double> n01;
    for (auto& g : params.gates)
      for (Eigen::Index i = 0; i < g.b.size(); ++i) g.b[i] = n01(rng);
    std::vector<Vector> xs, zeros;
    for (int t = 0; t < 12; ++t) {
      Vector x(in);
      for (int i = 0; i < in; ++i) x[i] = 2.0 * n01(rng);
      xs.push_back(x);
      zeros.push_back(Vector::Zero(hid));
    }
    const auto ep = unroll(params, xs, zeros, EpLstmState::zeros(hid));
    const auto ref = oracle::lstm_run(oracle::lstm_from(params), xs, Vector::Zero(hid), Vector::Zero(hid));
    for (std::size_t t = 0; t < xs.size(); ++t) {
      REQUIRE(ep.states[t].h == ref.h[t]);
      REQUIRE(ep.states[t].c == ref.c[t]);
    }
  }
}

TEST_CASE("reinstatement adds r * c_ep to the cell") {
  Rng rng(9);
  auto params = EpLstmParams::random(2, 3, rng);
  const Vector x = Vector::Constant(2, 0.5);
  const Vector c_ep = Vector::Constant(3, 0.7);
  const auto with = forward_step(params, x, EpLstmState::zeros(3), c_ep);
  const auto without = forward_step(params, x, EpLstmState::zeros(3), Vector::Zero(3));
  CHECK((with.state.c - without.state.c - with.r_gate.cwiseProduct(c_ep)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((with.r_gate.array() > 0.0).all());
  CHECK((with.r_gate.array() < 1.0).all());
}

TEST_CASE("initialization bounds and zero biases") {
  Rng rng(1);
  const auto p = EpLstmParams::random(6, 10, rng);
  const double bound = 1.0 / std::sqrt(16.0);
  for (const auto& g : p.gates) {
    CHECK(g.wx.cwiseAbs().maxCoeff() <= bound);
    CHECK(g.wh.cwiseAbs().maxCoeff() <= bound);
    CHECK(g.b.isZero());
  }
  CHECK(p.parameter_count() == 5u * (10 * 6 + 10 * 10 + 10));
}

TEST_CASE("flatten and named tensors round-trip") {
  Rng rng(2);
  const auto p = EpLstmParams::random(3, 4, rng);
  std::vector<double> flat(p.parameter_count());
  p.flatten_into(flat.data());
  auto q = EpLstmParams::zeros(3, 4);
  q.assign_from(flat.data());
  const auto back = EpLstmParams::from_named_tensors(p.named_tensors());
  for (int g = 0; g < kGateCount; ++g) {
    CHECK(q.gates[g].wx == p.gates[g].wx);
    CHECK(q.gates[g].wh == p.gates[g].wh);
    CHECK(back.gates[g].b == p.gates[g].b);
  }
  CHECK(p.named_tensors().count("lstm.W_xr") == 1);
}

TEST_CASE("forward rejects bad shapes and non-finite input") {
  Rng rng(4);
  const auto p = EpLstmParams::random(2, 3, rng);
  CHECK_THROWS_AS(forward_step(p, Vector::Zero(3), EpLstmState::zeros(3), Vector::Zero(3)), std::invalid_argument);
  Vector x = Vector::Zero(2);
  x[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forward_step(p, x, EpLstmState::zeros(3), Vector::Zero(3)), NonFiniteError);
}
