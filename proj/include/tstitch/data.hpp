#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ts {

using StateVec = std::vector<double>;

/// One offline experience tuple (s, a, r, s').
struct Transition {
  StateVec state;
  std::vector<double> action;
  double reward = 0.0;
  StateVec next_state;
  bool terminal = false;  // true only when the episode really ended; timeouts leave it false
};

struct Trajectory {
  std::uint64_t id = 0;
  std::vector<Transition> steps;

  std::size_t size() const { return steps.size(); }
  const StateVec& initial_state() const { return steps.front().state; }
};

struct Dims {
  std::size_t state = 0;
  std::size_t action = 0;
  friend bool operator==(const Dims&, const Dims&) = default;
};

struct Dataset {
  Dims dims;
  std::vector<Trajectory> trajectories;
  std::map<std::string, std::string> meta;

  std::size_t transition_count() const;
  std::size_t longest_trajectory() const;
  /// Position of the trajectory with `id` in `trajectories`; throws std::out_of_range.
  std::size_t position_of(std::uint64_t id) const;
  const Trajectory& by_id(std::uint64_t id) const { return trajectories[position_of(id)]; }
};

/// Bitwise equality of two vectors (distinguishes -0.0 from 0.0, NaN payloads).
bool bit_equal(std::span<const double> a, std::span<const double> b);
bool bit_equal(const Transition& a, const Transition& b);
bool bit_equal(const Trajectory& a, const Trajectory& b);
bool bit_equal(const Dataset& a, const Dataset& b);

// -- validation --------------------------------------------------------------

enum class ViolationKind {
  empty_trajectory,
  dimension,
  non_finite,
  contiguity,
  early_terminal,
  duplicate_id,
};

struct Violation {
  ViolationKind kind;
  std::uint64_t trajectory = 0;
  std::size_t step = 0;
  std::string message;
};

const char* to_string(ViolationKind kind);

/// Every broken Trajectory/Dataset invariant, in (trajectory, step) order. Empty iff valid.
std::vector<Violation> validate(const Dataset& dataset);

// -- trajectory quantities ---------------------------------------------------

/// Undiscounted sum of stored rewards, in step order.
double trajectory_return(const Trajectory& traj);

double mean_return(const Dataset& dataset);

/// The two ways of factorising a trajectory density:
/// policy_dynamics uses p(a|s) p(s'|s,a); forward_inverse uses p(s'|s) p(a|s,s').
enum class Factorization { policy_dynamics, forward_inverse };

/// Log-density callables for each conditional factor. Only the two used by the chosen
/// factorisation (plus `initial`) need to be set.
struct FactorLogDensities {
  std::function<double(std::span<const double> s)> initial;
  std::function<double(std::span<const double> s, std::span<const double> a)> policy;
  std::function<double(std::span<const double> s, std::span<const double> a,
                       std::span<const double> s_next)>
      dynamics;
  std::function<double(std::span<const double> s, std::span<const double> s_next)> forward;
  std::function<double(std::span<const double> s, std::span<const double> s_next,
                       std::span<const double> a)>
      inverse;
};

/// log p(s0) + sum over steps of the factorisation's per-step log factors.
/// Throws std::domain_error naming the step when any factor is non-finite.
double trajectory_log_prob(const Trajectory& traj, Factorization mode,
                           const FactorLogDensities& densities);

}  // namespace ts
