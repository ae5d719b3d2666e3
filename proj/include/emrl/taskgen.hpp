#pragma once

// Task processes: the Blackwell-MacQueen urn, hypergeometric epochs and the
// contexts (barcodes, synthetic class embeddings) that identify tasks.

#include "emrl/common.hpp"

#include <functional>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace emrl {

enum class EnvKind { BarcodeBandit, ClassBandit, CompositionalBandit, WaterMaze, TwoStep };

std::string_view to_string(EnvKind kind);
EnvKind env_kind_from_string(std::string_view name);

struct MdpParams {
  int target = -1;                // rewarding arm b or goal cell; -1 when unused
  std::vector<double> arm_probs;  // per-arm Bernoulli success probabilities
};

struct TaskSpec {
  std::size_t task_id = 0;
  MdpParams mdp;
  Vector context;
};

struct UrnState {
  explicit UrnState(double concentration);

  double alpha;
  std::vector<TaskSpec> drawn;
  std::size_t n = 0;
};

struct UrnDraw {
  TaskSpec task;
  bool fresh = false;
};

using TaskSampler = std::function<TaskSpec(Rng&)>;

/// Probability that the next urn draw comes from the base distribution.
double fresh_draw_probability(const UrnState& state);

/// One step of the urn: a fresh base draw with probability alpha/(alpha+n),
/// otherwise a uniform copy of an earlier draw. The result is appended.
UrnDraw urn_draw(UrnState& state, const TaskSampler& base, Rng& rng);

Vector sample_barcode(int length, Rng& rng);

/// Distinct barcodes by rejection; throws when 2^length < count.
std::vector<Vector> sample_unique_barcodes(int length, std::size_t count, Rng& rng);

Vector random_unit_vector(int dim, Rng& rng);

inline constexpr int kClassEmbeddingDim = 128;
inline constexpr double kDefaultClassNoise = 0.1;

/// normalize(prototype + N(0, noise_scale^2 I)).
Vector sample_class_instance(const Vector& prototype, double noise_scale, Rng& rng);

struct EpochOptions {
  EnvKind kind = EnvKind::BarcodeBandit;
  std::size_t n_unique_contexts = 10;
  std::size_t duplicates = 10;
  std::size_t n_positions = 10;  // arms for bandits, cells for the maze
  int barcode_length = 10;
  int class_dim = kClassEmbeddingDim;
  double class_noise = kDefaultClassNoise;
  double high_prob = 0.9;
  double low_prob = 0.1;
};

struct PlannedEpisode {
  // Indices into EpochPlan::tasks. Compositional episodes hold {high, low}.
  std::vector<std::size_t> tasks;
  // Context actually shown for each task (class instances vary per showing).
  std::vector<Vector> contexts;
  // Earlier showings of each task within the epoch.
  std::vector<std::size_t> exposures;
};

struct EpochPlan {
  EnvKind kind = EnvKind::BarcodeBandit;
  std::vector<TaskSpec> tasks;
  std::vector<std::size_t> duplicates;
  std::vector<PlannedEpisode> episodes;
  std::uint64_t mapping_seed = 0;

  std::size_t episodes_per_epoch() const { return episodes.size(); }
};

/// Builds one epoch with a freshly shuffled context-to-parameter mapping.
/// Every arm/goal position gets at least one context. Two-step epochs are
/// built by the two-step environment itself and are rejected here.
EpochPlan build_epoch(const EpochOptions& options, Rng& rng);

void save_epoch_plan(const EpochPlan& plan, std::ostream& out);
EpochPlan load_epoch_plan(std::istream& in);

}  // namespace emrl
