#pragma once

// Episodic LSTM cell. A standard LSTM (input, forget, output gates and a tanh
// candidate) plus a reinstatement gate r that admits a retrieved cell state:
//
//   c_t = i_t * c_in + f_t * c_{t-1} + r_t * c_ep
//   h_t = o_t * tanh(c_t)
//
// Every gate is sigmoid(W_x x_t + W_h h_{t-1} + b); c_in uses tanh.

#include "emrl/common.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace emrl {

enum class Gate : int { Input = 0, Forget = 1, Reinstate = 2, Output = 3, Candidate = 4 };
inline constexpr int kGateCount = 5;

std::string gate_name(Gate g);

struct GateWeights {
  Matrix wx;  // hidden x input
  Matrix wh;  // hidden x hidden
  Vector b;   // hidden
};

struct EpLstmParams {
  std::array<GateWeights, kGateCount> gates;

  static EpLstmParams zeros(int input_size, int hidden_size);
  /// Weights uniform in +-1/sqrt(input + hidden), biases zero.
  static EpLstmParams random(int input_size, int hidden_size, Rng& rng);

  GateWeights& operator[](Gate g) { return gates[static_cast<int>(g)]; }
  const GateWeights& operator[](Gate g) const { return gates[static_cast<int>(g)]; }

  int input_size() const { return static_cast<int>(gates[0].wx.cols()); }
  int hidden_size() const { return static_cast<int>(gates[0].wx.rows()); }
  std::size_t parameter_count() const;

  void set_zero();
  EpLstmParams& operator+=(const EpLstmParams& other);

  /// Flat layout: per gate, wx then wh (column-major) then b.
  void flatten_into(double* out) const;
  void assign_from(const double* in);

  std::map<std::string, Matrix> named_tensors() const;
  static EpLstmParams from_named_tensors(const std::map<std::string, Matrix>& tensors);
};

struct EpLstmState {
  Vector h;
  Vector c;

  static EpLstmState zeros(int hidden_size) {
    return {Vector::Zero(hidden_size), Vector::Zero(hidden_size)};
  }
};

/// Everything backward_step needs from one forward step.
struct StepCache {
  Vector x;
  Vector h_prev;
  Vector c_prev;
  Vector c_ep;
  bool has_ep = false;  // false when c_ep is identically zero
  std::array<Vector, kGateCount> preact;
  Vector i, f, r, o, c_in;
  Vector c;
  Vector tanh_c;
};

struct ForwardResult {
  EpLstmState state;
  Vector r_gate;
  StepCache cache;
};

ForwardResult forward_step(const EpLstmParams& params, const Vector& x, const EpLstmState& prev, const Vector& c_ep);

struct StepGradients {
  Vector grad_x;
  EpLstmState grad_prev;
  Vector grad_c_ep;
};

/// Accumulates parameter gradients into `param_grads` and returns gradients
/// with respect to the step inputs. grad_h and grad_c are dL/dh_t and the
/// dL/dc_t flowing back from later steps.
StepGradients backward_step(const EpLstmParams& params, const StepCache& cache, const Vector& grad_h,
                            const Vector& grad_c, EpLstmParams& param_grads);

struct BackwardResult {
  EpLstmParams param_grads;
  Vector grad_x;
  EpLstmState grad_prev;
  Vector grad_c_ep;
};

BackwardResult backward_step(const EpLstmParams& params, const StepCache& cache, const Vector& grad_h,
                             const Vector& grad_c);

struct Unrolled {
  std::vector<EpLstmState> states;  // state after each step
  std::vector<Vector> r_gates;
  std::vector<StepCache> caches;
  EpLstmState final_state;
};

Unrolled unroll(const EpLstmParams& params, const std::vector<Vector>& inputs, const std::vector<Vector>& c_eps,
                const EpLstmState& init);

struct SequenceGradients {
  EpLstmParams param_grads;
  std::vector<Vector> grad_x;
  EpLstmState grad_init;
};

/// Reverse-mode pass over an unrolled sequence. grad_h[t] is the direct
/// gradient of the loss with respect to h_t; retrieved states are constants.
SequenceGradients backward_through_time(const EpLstmParams& params, const std::vector<StepCache>& caches,
                                        const std::vector<Vector>& grad_h);

}  // namespace emrl
