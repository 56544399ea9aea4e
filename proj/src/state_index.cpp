#include "tstitch/state_index.hpp"

#include <algorithm>
#include <cmath>

namespace ts {

namespace {

bool within(std::span<const double> x, std::span<const double> center, double radius) {
  if (std::isinf(radius)) return true;
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - center[i];
    d2 += d * d;
  }
  return d2 <= radius * radius;
}

}  // namespace

std::size_t StateIndex::KeyHash::operator()(const std::vector<std::int64_t>& key) const noexcept {
  std::size_t h = 0x9e3779b97f4a7c15ULL;
  for (auto k : key) {
    h ^= static_cast<std::size_t>(k) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

StateIndex::StateIndex(const Dataset& dataset, double cell_size, std::size_t max_grid_dims)
    : dims_(dataset.dims.state),
      cell_size_(cell_size),
      use_grid_(dataset.dims.state <= max_grid_dims && cell_size > 0.0) {
  std::vector<const Trajectory*> order;
  for (const auto& t : dataset.trajectories) order.push_back(&t);
  std::sort(order.begin(), order.end(),
            [](const Trajectory* a, const Trajectory* b) { return a->id < b->id; });

  for (const auto* traj : order) {
    first_entry_[traj->id] = entries_.size();
    for (std::size_t t = 0; t < traj->size(); ++t) {
      entries_.push_back({traj->id, t, traj->steps[t].state, false});
    }
    if (!traj->steps.empty() && traj->steps.back().terminal) {
      entries_.push_back({traj->id, traj->size(), traj->steps.back().next_state, true});
    }
  }
  if (use_grid_) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      cells_[cell_of(entries_[i].state)].push_back(i);
    }
  }
}

std::vector<std::int64_t> StateIndex::cell_of(std::span<const double> x) const {
  std::vector<std::int64_t> key(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    key[i] = static_cast<std::int64_t>(std::floor(x[i] / cell_size_));
  }
  return key;
}

std::vector<std::size_t> StateIndex::scan(std::span<const double> center, double radius) const {
  return linear_radius_query(entries_, center, radius);
}

std::vector<std::size_t> StateIndex::radius_query(std::span<const double> center,
                                                  double radius) const {
  if (center.size() != dims_) throw std::invalid_argument("radius_query: width mismatch");
  if (!use_grid_ || std::isinf(radius)) return scan(center, radius);

  std::vector<std::int64_t> lo(dims_), hi(dims_);
  double cells = 1.0;
  for (std::size_t i = 0; i < dims_; ++i) {
    lo[i] = static_cast<std::int64_t>(std::floor((center[i] - radius) / cell_size_));
    hi[i] = static_cast<std::int64_t>(std::floor((center[i] + radius) / cell_size_));
    cells *= static_cast<double>(hi[i] - lo[i] + 1);
  }
  if (cells > static_cast<double>(entries_.size())) return scan(center, radius);

  std::vector<std::size_t> hits;
  std::vector<std::int64_t> key = lo;
  while (true) {
    if (auto it = cells_.find(key); it != cells_.end()) {
      for (auto idx : it->second) {
        if (within(entries_[idx].state, center, radius)) hits.push_back(idx);
      }
    }
    std::size_t d = 0;
    while (d < dims_ && key[d] == hi[d]) {
      key[d] = lo[d];
      ++d;
    }
    if (d == dims_) break;
    ++key[d];
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

std::size_t StateIndex::find(std::uint64_t trajectory, std::size_t step) const {
  const auto it = first_entry_.find(trajectory);
  if (it == first_entry_.end()) return npos;
  const auto pos = it->second + step;
  if (pos >= entries_.size() || entries_[pos].trajectory != trajectory ||
      entries_[pos].step != step) {
    return npos;
  }
  return pos;
}

std::vector<std::size_t> linear_radius_query(const std::vector<IndexEntry>& entries,
                                             std::span<const double> center, double radius) {
  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (within(entries[i].state, center, radius)) hits.push_back(i);
  }
  return hits;
}

}  // namespace ts
