#include "emrl/dnd.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>

namespace emrl {

double cosine_distance(const Vector& a, double norm_a, const Vector& b, double norm_b) {
  if (norm_a == 0.0 || norm_b == 0.0) return 2.0;
  return 1.0 - a.dot(b) / (norm_a * norm_b);
}

Dnd::Dnd(std::size_t key_dim, std::size_t value_dim, std::size_t k, double kernel_delta)
    : key_dim_(key_dim), value_dim_(value_dim), k_(k), kernel_delta_(kernel_delta) {
  if (k_ < 1) throw std::invalid_argument("DND needs k >= 1");
  if (!(kernel_delta_ > 0.0)) throw std::invalid_argument("DND kernel delta must be positive");
}

void Dnd::write(const Vector& key, const Vector& value) {
  if (static_cast<std::size_t>(key.size()) != key_dim_ || static_cast<std::size_t>(value.size()) != value_dim_)
    throw std::invalid_argument("DND write: dimension mismatch");
  if (!key.allFinite() || !value.allFinite()) throw NonFiniteError("DND write: non-finite key or value");
  for (auto& e : entries_) {
    if (e.key == key) {
      e.value = value;
      return;
    }
  }
  entries_.push_back({key, value, next_index_++});
  key_norms_.push_back(key.norm());
}

DndLookup Dnd::lookup(const Vector& query) const {
  if (static_cast<std::size_t>(query.size()) != key_dim_) throw std::invalid_argument("DND read: dimension mismatch");
  DndLookup out;
  out.value = Vector::Zero(static_cast<Eigen::Index>(value_dim_));
  if (entries_.empty()) return out;

  const double qn = query.norm();
  std::vector<double> dist(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i)
    dist[i] = cosine_distance(query, qn, entries_[i].key, key_norms_[i]);

  // Entries are stored in insertion order, so position breaks distance ties.
  std::vector<std::size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t kk = std::min(k_, entries_.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });

  if (kk == 1) {
    out.neighbors = {order[0]};
    out.distances = {dist[order[0]]};
    out.weights = {1.0};
    out.value = entries_[order[0]].value;
    return out;
  }
  double total = 0.0;
  for (std::size_t j = 0; j < kk; ++j) {
    const std::size_t i = order[j];
    const double kernel = 1.0 / (dist[i] + kernel_delta_);
    out.neighbors.push_back(i);
    out.distances.push_back(dist[i]);
    out.weights.push_back(kernel);
    total += kernel;
  }
  for (std::size_t j = 0; j < kk; ++j) {
    out.weights[j] /= total;
    out.value += out.weights[j] * entries_[out.neighbors[j]].value;
  }
  return out;
}

void Dnd::clear() {
  entries_.clear();
  key_norms_.clear();
  next_index_ = 0;
}

void Dnd::save(std::ostream& out) const {
  nlohmann::json j;
  j["format"] = "emrl-dnd";
  j["version"] = 1;
  j["key_dim"] = key_dim_;
  j["value_dim"] = value_dim_;
  j["k"] = k_;
  j["kernel_delta"] = kernel_delta_;
  j["next_index"] = next_index_;
  auto& rows = j["entries"] = nlohmann::json::array();
  for (const auto& e : entries_) {
    rows.push_back({{"insert_index", e.insert_index},
                    {"key", std::vector<double>(e.key.data(), e.key.data() + e.key.size())},
                    {"value", std::vector<double>(e.value.data(), e.value.data() + e.value.size())}});
  }
  out << j.dump() << '\n';
}

Dnd Dnd::load(std::istream& in) {
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "emrl-dnd" || j.value("version", 0) != 1)
    throw std::runtime_error("not an emrl DND dump (version 1)");
  Dnd d(j.at("key_dim").get<std::size_t>(), j.at("value_dim").get<std::size_t>(), j.at("k").get<std::size_t>(),
        j.at("kernel_delta").get<double>());
  for (const auto& row : j.at("entries")) {
    const auto k = row.at("key").get<std::vector<double>>();
    const auto v = row.at("value").get<std::vector<double>>();
    if (k.size() != d.key_dim_ || v.size() != d.value_dim_) throw std::runtime_error("DND dump: dimension mismatch");
    MemoryEntry e;
    e.key = Eigen::Map<const Vector>(k.data(), static_cast<Eigen::Index>(k.size()));
    e.value = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    e.insert_index = row.at("insert_index").get<std::size_t>();
    d.key_norms_.push_back(e.key.norm());
    d.entries_.push_back(std::move(e));
  }
  d.next_index_ = j.at("next_index").get<std::size_t>();
  return d;
}

}  // namespace emrl
