#pragma once

#include "emrl/common.hpp"

#include <iosfwd>
#include <vector>

namespace emrl {

struct MemoryEntry {
  Vector key;
  Vector value;
  std::size_t insert_index = 0;
};

/// Result of a kNN lookup: which entries were blended and with what weight.
struct DndLookup {
  Vector value;
  std::vector<std::size_t> neighbors;  // positions in entries(), nearest first
  std::vector<double> distances;
  std::vector<double> weights;
};

/// Differentiable neural dictionary used as an episodic store.
///
/// Keys are context embeddings and values are LSTM cell states. Reads take the
/// k nearest keys under cosine distance d = 1 - cos(q, k) and blend their values
/// with normalized inverse-distance weights 1 / (d + kernel_delta). Distance
/// ties go to the entry inserted first. A zero-norm query or key sits at the
/// maximal distance 2 from everything. Reading an empty store yields zeros.
class Dnd {
 public:
  static constexpr double kDefaultKernelDelta = 1e-3;

  Dnd(std::size_t key_dim, std::size_t value_dim, std::size_t k = 1,
      double kernel_delta = kDefaultKernelDelta);

  /// Appends (key, value), or replaces the value of an entry whose key is
  /// coordinate-wise identical.
  void write(const Vector& key, const Vector& value);

  Vector read(const Vector& query) const { return lookup(query).value; }
  DndLookup lookup(const Vector& query) const;

  void clear();

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t key_dim() const { return key_dim_; }
  std::size_t value_dim() const { return value_dim_; }
  std::size_t k() const { return k_; }
  double kernel_delta() const { return kernel_delta_; }
  const std::vector<MemoryEntry>& entries() const { return entries_; }

  void save(std::ostream& out) const;
  static Dnd load(std::istream& in);

 private:
  std::size_t key_dim_;
  std::size_t value_dim_;
  std::size_t k_;
  double kernel_delta_;
  std::size_t next_index_ = 0;
  std::vector<MemoryEntry> entries_;
  std::vector<double> key_norms_;
};

double cosine_distance(const Vector& a, double norm_a, const Vector& b, double norm_b);

}  // namespace emrl
