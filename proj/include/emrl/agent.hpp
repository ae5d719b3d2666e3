#pragma once

// Recurrent actor-critic agents: plain L2RL, L2RL with the context appended to
// its input, and epL2RL (episodic LSTM reading a DND every step and writing its
// cell state at the end of each episode).

#include "emrl/common.hpp"
#include "emrl/dnd.hpp"
#include "emrl/eplstm.hpp"

#include <iosfwd>
#include <optional>
#include <string_view>

namespace emrl {

enum class AgentVariant { L2rl, L2rlContext, EpL2rl };

std::string_view to_string(AgentVariant v);
AgentVariant agent_variant_from_string(std::string_view name);

/// How context vectors become DND keys. Bipolar maps {0,1} barcodes to
/// {-1,+1} so that no key has zero norm.
enum class KeyEncoding { Identity, Bipolar };

struct AgentShape {
  AgentVariant variant = AgentVariant::EpL2rl;
  int n_actions = 2;
  int observation_dim = 0;
  int context_dim = 0;  // width of the context input (L2rlContext only)
  int key_dim = 0;      // width of DND keys (EpL2rl only)
  int hidden = 50;
  std::size_t dnd_k = 1;
  double kernel_delta = Dnd::kDefaultKernelDelta;
  KeyEncoding key_encoding = KeyEncoding::Identity;

  /// prev action one-hot, prev reward, observation, and (L2rlContext) context.
  int input_dim() const;
};

struct PolicyValueHeads {
  Matrix policy_w;  // actions x hidden
  Vector policy_b;
  Vector value_w;   // hidden
  double value_b = 0.0;
};

struct AgentParams {
  AgentShape shape;
  EpLstmParams lstm;
  PolicyValueHeads heads;

  static AgentParams random(const AgentShape& shape, Rng& rng);
  static AgentParams zeros_like(const AgentParams& other);

  std::size_t parameter_count() const;
  Vector flatten() const;
  void assign(const Vector& flat);
  std::uint64_t fingerprint() const;

  void save(std::ostream& out, const std::string& config_hash = {}) const;
  static AgentParams load(std::istream& in);
};

struct AgentInput {
  Vector prev_action_onehot;  // all-zero on the first step of an episode
  double prev_reward = 0.0;
  Vector observation;
  Vector context;             // consumed only by L2rlContext
};

/// Everything one step leaves behind for logging and the gradient pass.
struct ActRecord {
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  Vector probs;
  Vector h;  // hidden state the heads read
  Vector r_gate;
  StepCache cache;
};

class Agent {
 public:
  explicit Agent(const AgentParams* params);

  /// One step: build the input, read the DND (epL2RL), advance the cell and
  /// sample (or argmax) the policy.
  ActRecord act(const AgentInput& input, const std::optional<Vector>& query_key, Rng& rng, bool greedy = false);

  /// Stores the current cell state under every key without resetting.
  void write_memory(const std::vector<Vector>& keys);

  /// Stores the final cell state under the keys (epL2RL) and zeroes h and c.
  void end_episode(const std::vector<Vector>& keys);

  void end_epoch();

  Vector build_input(const AgentInput& input) const;
  Vector encode_key(const Vector& context) const;

  const AgentParams& params() const { return *params_; }
  void set_params(const AgentParams* params) { params_ = params; }
  const EpLstmState& state() const { return state_; }
  const Dnd& memory() const { return dnd_; }
  Dnd& memory() { return dnd_; }

  std::size_t dnd_reads() const { return reads_; }
  std::size_t dnd_write_calls() const { return write_calls_; }

 private:
  const AgentParams* params_;
  EpLstmState state_;
  Dnd dnd_;
  std::size_t reads_ = 0;
  std::size_t write_calls_ = 0;
};

Vector softmax(const Vector& logits);

}  // namespace emrl
