#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "tstitch/data.hpp"

namespace ts {

/// One occurrence of a state in a dataset. `step` is the index of the transition whose
/// `state` field holds it, or the trajectory length for a terminal next_state.
struct IndexEntry {
  std::uint64_t trajectory = 0;
  std::size_t step = 0;
  StateVec state;
  bool terminal = false;  // the terminal next_state of its trajectory
};

inline constexpr double kUnboundedRadius = std::numeric_limits<double>::infinity();

/// Radius-searchable set of every state occurrence in a dataset. Entries are stored in
/// (trajectory id, step) order and queries report entry positions in that same order.
class StateIndex {
 public:
  /// `cell_size` is the grid bucket side; states wider than `max_grid_dims` use a linear scan.
  explicit StateIndex(const Dataset& dataset, double cell_size = 0.1,
                      std::size_t max_grid_dims = 16);

  const std::vector<IndexEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Positions of entries with ||state - center||_2 <= radius, ascending.
  std::vector<std::size_t> radius_query(std::span<const double> center, double radius) const;

  /// Position of the entry for occurrence (trajectory, step), or npos.
  std::size_t find(std::uint64_t trajectory, std::size_t step) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  struct KeyHash {
    std::size_t operator()(const std::vector<std::int64_t>& key) const noexcept;
  };

  std::vector<std::int64_t> cell_of(std::span<const double> x) const;
  std::vector<std::size_t> scan(std::span<const double> center, double radius) const;

  std::vector<IndexEntry> entries_;
  std::size_t dims_ = 0;
  double cell_size_;
  bool use_grid_;
  std::unordered_map<std::vector<std::int64_t>, std::vector<std::size_t>, KeyHash> cells_;
  std::unordered_map<std::uint64_t, std::size_t> first_entry_;  // trajectory id -> entry position
};

/// O(N) reference used to cross-check the grid.
std::vector<std::size_t> linear_radius_query(const std::vector<IndexEntry>& entries,
                                             std::span<const double> center, double radius);

}  // namespace ts
