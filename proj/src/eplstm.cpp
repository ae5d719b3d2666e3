#include "emrl/eplstm.hpp"

#include <cmath>

namespace emrl {

std::string gate_name(Gate g) {
  switch (g) {
    case Gate::Input: return "i";
    case Gate::Forget: return "f";
    case Gate::Reinstate: return "r";
    case Gate::Output: return "o";
    case Gate::Candidate: return "c";
  }
  return "?";
}

EpLstmParams EpLstmParams::zeros(int input_size, int hidden_size) {
  if (input_size < 0 || hidden_size < 1) throw std::invalid_argument("bad epLSTM dimensions");
  EpLstmParams p;
  for (auto& g : p.gates) {
    g.wx = Matrix::Zero(hidden_size, input_size);
    g.wh = Matrix::Zero(hidden_size, hidden_size);
    g.b = Vector::Zero(hidden_size);
  }
  return p;
}

EpLstmParams EpLstmParams::random(int input_size, int hidden_size, Rng& rng) {
  EpLstmParams p = zeros(input_size, hidden_size);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_size + hidden_size));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& g : p.gates) {
    for (Eigen::Index k = 0; k < g.wx.size(); ++k) g.wx.data()[k] = u(rng);
    for (Eigen::Index k = 0; k < g.wh.size(); ++k) g.wh.data()[k] = u(rng);
  }
  return p;
}

std::size_t EpLstmParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& g : gates) n += static_cast<std::size_t>(g.wx.size() + g.wh.size() + g.b.size());
  return n;
}

void EpLstmParams::set_zero() {
  for (auto& g : gates) {
    g.wx.setZero();
    g.wh.setZero();
    g.b.setZero();
  }
}

EpLstmParams& EpLstmParams::operator+=(const EpLstmParams& other) {
  for (int k = 0; k < kGateCount; ++k) {
    gates[k].wx += other.gates[k].wx;
    gates[k].wh += other.gates[k].wh;
    gates[k].b += other.gates[k].b;
  }
  return *this;
}

void EpLstmParams::flatten_into(double* out) const {
  for (const auto& g : gates) {
    out = std::copy(g.wx.data(), g.wx.data() + g.wx.size(), out);
    out = std::copy(g.wh.data(), g.wh.data() + g.wh.size(), out);
    out = std::copy(g.b.data(), g.b.data() + g.b.size(), out);
  }
}

void EpLstmParams::assign_from(const double* in) {
  for (auto& g : gates) {
    std::copy(in, in + g.wx.size(), g.wx.data());
    in += g.wx.size();
    std::copy(in, in + g.wh.size(), g.wh.data());
    in += g.wh.size();
    std::copy(in, in + g.b.size(), g.b.data());
    in += g.b.size();
  }
}

std::map<std::string, Matrix> EpLstmParams::named_tensors() const {
  std::map<std::string, Matrix> out;
  for (int k = 0; k < kGateCount; ++k) {
    const auto name = gate_name(static_cast<Gate>(k));
    out["lstm.W_x" + name] = gates[k].wx;
    out["lstm.W_h" + name] = gates[k].wh;
    out["lstm.b_" + name] = gates[k].b;
  }
  return out;
}

EpLstmParams EpLstmParams::from_named_tensors(const std::map<std::string, Matrix>& tensors) {
  EpLstmParams p;
  for (int k = 0; k < kGateCount; ++k) {
    const auto name = gate_name(static_cast<Gate>(k));
    auto fetch = [&](const std::string& key) -> const Matrix& {
      auto it = tensors.find(key);
      if (it == tensors.end()) throw std::runtime_error("checkpoint is missing tensor " + key);
      return it->second;
    };
    p.gates[k].wx = fetch("lstm.W_x" + name);
    p.gates[k].wh = fetch("lstm.W_h" + name);
    const Matrix& b = fetch("lstm.b_" + name);
    if (b.cols() != 1) throw std::runtime_error("bias tensor must be a column");
    p.gates[k].b = b.col(0);
  }
  const int h = p.hidden_size();
  const int in = p.input_size();
  for (const auto& g : p.gates) {
    if (g.wx.rows() != h || g.wx.cols() != in || g.wh.rows() != h || g.wh.cols() != h || g.b.size() != h)
      throw std::runtime_error("inconsistent epLSTM tensor shapes in checkpoint");
  }
  return p;
}

namespace {

Vector preactivation(const GateWeights& w, const Vector& x, const Vector& h_prev) {
  return w.wx * x + w.wh * h_prev + w.b;
}

}  // namespace

ForwardResult forward_step(const EpLstmParams& params, const Vector& x, const EpLstmState& prev, const Vector& c_ep) {
  const Eigen::Index hidden = params.hidden_size();
  if (x.size() != params.input_size() || prev.h.size() != hidden || prev.c.size() != hidden || c_ep.size() != hidden)
    throw std::invalid_argument("epLSTM forward: dimension mismatch");
  if (!x.allFinite() || !prev.h.allFinite() || !prev.c.allFinite() || !c_ep.allFinite())
    throw NonFiniteError("epLSTM forward: non-finite input");

  ForwardResult out;
  StepCache& k = out.cache;
  k.x = x;
  k.h_prev = prev.h;
  k.c_prev = prev.c;
  k.c_ep = c_ep;
  k.has_ep = (c_ep.array() != 0.0).any();
  for (int g = 0; g < kGateCount; ++g) k.preact[g] = preactivation(params.gates[g], x, prev.h);

  k.i = sigmoid(k.preact[static_cast<int>(Gate::Input)]);
  k.f = sigmoid(k.preact[static_cast<int>(Gate::Forget)]);
  k.r = sigmoid(k.preact[static_cast<int>(Gate::Reinstate)]);
  k.o = sigmoid(k.preact[static_cast<int>(Gate::Output)]);
  k.c_in = k.preact[static_cast<int>(Gate::Candidate)].array().tanh();

  k.c = k.i.cwiseProduct(k.c_in) + k.f.cwiseProduct(prev.c);
  if (k.has_ep) k.c += k.r.cwiseProduct(c_ep);
  k.tanh_c = k.c.array().tanh();

  out.state.c = k.c;
  out.state.h = k.o.cwiseProduct(k.tanh_c);
  out.r_gate = k.r;
  return out;
}

StepGradients backward_step(const EpLstmParams& params, const StepCache& k, const Vector& grad_h, const Vector& grad_c,
                            EpLstmParams& param_grads) {
  const Eigen::Index hidden = params.hidden_size();
  if (k.x.size() != params.input_size() || k.c.size() != hidden || grad_h.size() != hidden ||
      grad_c.size() != hidden)
    throw std::invalid_argument("epLSTM backward: cache does not match parameters");

  const Vector dc = grad_c + grad_h.cwiseProduct(k.o).cwiseProduct((1.0 - k.tanh_c.array().square()).matrix());

  std::array<Vector, kGateCount> da;
  auto sig_grad = [](const Vector& upstream, const Vector& s) -> Vector {
    return upstream.array() * s.array() * (1.0 - s.array());
  };
  da[static_cast<int>(Gate::Input)] = sig_grad(dc.cwiseProduct(k.c_in), k.i);
  da[static_cast<int>(Gate::Forget)] = sig_grad(dc.cwiseProduct(k.c_prev), k.f);
  da[static_cast<int>(Gate::Output)] = sig_grad(grad_h.cwiseProduct(k.tanh_c), k.o);
  da[static_cast<int>(Gate::Candidate)] = dc.array() * k.i.array() * (1.0 - k.c_in.array().square());

  StepGradients out;
  out.grad_x = Vector::Zero(params.input_size());
  out.grad_prev.h = Vector::Zero(hidden);
  out.grad_prev.c = dc.cwiseProduct(k.f);
  out.grad_c_ep = dc.cwiseProduct(k.r);
  // With c_ep == 0 the r pathway carries no gradient and is skipped below.
  if (k.has_ep) da[static_cast<int>(Gate::Reinstate)] = sig_grad(dc.cwiseProduct(k.c_ep), k.r);

  for (int g = 0; g < kGateCount; ++g) {
    if (g == static_cast<int>(Gate::Reinstate) && !k.has_ep) continue;
    const GateWeights& w = params.gates[g];
    GateWeights& gw = param_grads.gates[g];
    gw.wx.noalias() += da[g] * k.x.transpose();
    gw.wh.noalias() += da[g] * k.h_prev.transpose();
    gw.b += da[g];
    out.grad_x.noalias() += w.wx.transpose() * da[g];
    out.grad_prev.h.noalias() += w.wh.transpose() * da[g];
  }
  return out;
}

BackwardResult backward_step(const EpLstmParams& params, const StepCache& cache, const Vector& grad_h,
                             const Vector& grad_c) {
  BackwardResult out;
  out.param_grads = EpLstmParams::zeros(params.input_size(), params.hidden_size());
  auto g = backward_step(params, cache, grad_h, grad_c, out.param_grads);
  out.grad_x = std::move(g.grad_x);
  out.grad_prev = std::move(g.grad_prev);
  out.grad_c_ep = std::move(g.grad_c_ep);
  return out;
}

Unrolled unroll(const EpLstmParams& params, const std::vector<Vector>& inputs, const std::vector<Vector>& c_eps,
                const EpLstmState& init) {
  if (inputs.size() != c_eps.size()) throw std::invalid_argument("unroll: inputs and retrieved states differ in length");
  Unrolled out;
  out.final_state = init;
  out.states.reserve(inputs.size());
  out.caches.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto step = forward_step(params, inputs[t], out.final_state, c_eps[t]);
    out.final_state = step.state;
    out.states.push_back(std::move(step.state));
    out.r_gates.push_back(std::move(step.r_gate));
    out.caches.push_back(std::move(step.cache));
  }
  return out;
}

SequenceGradients backward_through_time(const EpLstmParams& params, const std::vector<StepCache>& caches,
                                        const std::vector<Vector>& grad_h) {
  if (caches.size() != grad_h.size()) throw std::invalid_argument("BPTT: one upstream gradient per step required");
  const int hidden = params.hidden_size();
  SequenceGradients out;
  out.param_grads = EpLstmParams::zeros(params.input_size(), hidden);
  out.grad_x.resize(caches.size());
  Vector carry_h = Vector::Zero(hidden);
  Vector carry_c = Vector::Zero(hidden);
  for (std::size_t t = caches.size(); t-- > 0;) {
    auto g = backward_step(params, caches[t], grad_h[t] + carry_h, carry_c, out.param_grads);
    out.grad_x[t] = std::move(g.grad_x);
    carry_h = std::move(g.grad_prev.h);
    carry_c = std::move(g.grad_prev.c);
  }
  out.grad_init = {carry_h, carry_c};
  return out;
}

}  // namespace emrl
