#include "tstitch/data.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ts {

std::size_t Dataset::transition_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  return n;
}

std::size_t Dataset::longest_trajectory() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n = std::max(n, t.size());
  return n;
}

std::size_t Dataset::position_of(std::uint64_t id) const {
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].id == id) return i;
  }
  throw std::out_of_range("no trajectory with id " + std::to_string(id));
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  return a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool bit_equal(const Transition& a, const Transition& b) {
  return bit_equal(a.state, b.state) && bit_equal(a.action, b.action) &&
         std::bit_cast<std::uint64_t>(a.reward) == std::bit_cast<std::uint64_t>(b.reward) &&
         bit_equal(a.next_state, b.next_state) && a.terminal == b.terminal;
}

bool bit_equal(const Trajectory& a, const Trajectory& b) {
  if (a.id != b.id || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!bit_equal(a.steps[i], b.steps[i])) return false;
  }
  return true;
}

bool bit_equal(const Dataset& a, const Dataset& b) {
  if (a.dims != b.dims || a.meta != b.meta || a.trajectories.size() != b.trajectories.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    if (!bit_equal(a.trajectories[i], b.trajectories[i])) return false;
  }
  return true;
}

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::empty_trajectory: return "empty_trajectory";
    case ViolationKind::dimension: return "dimension";
    case ViolationKind::non_finite: return "non_finite";
    case ViolationKind::contiguity: return "contiguity";
    case ViolationKind::early_terminal: return "early_terminal";
    case ViolationKind::duplicate_id: return "duplicate_id";
  }
  return "unknown";
}

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

std::vector<Violation> validate(const Dataset& dataset) {
  std::vector<Violation> report;
  std::set<std::uint64_t> seen;
  const auto dS = dataset.dims.state;
  const auto dA = dataset.dims.action;

  for (const auto& traj : dataset.trajectories) {
    const auto id = traj.id;
    if (!seen.insert(id).second) {
      report.push_back({ViolationKind::duplicate_id, id, 0, "trajectory id appears twice"});
    }
    if (traj.steps.empty()) {
      report.push_back({ViolationKind::empty_trajectory, id, 0, "trajectory has no steps"});
      continue;
    }
    for (std::size_t t = 0; t < traj.size(); ++t) {
      const auto& tr = traj.steps[t];
      if (tr.state.size() != dS || tr.next_state.size() != dS || tr.action.size() != dA) {
        std::ostringstream msg;
        msg << "widths (s=" << tr.state.size() << ", a=" << tr.action.size()
            << ", s'=" << tr.next_state.size() << ") expected (" << dS << ", " << dA << ")";
        report.push_back({ViolationKind::dimension, id, t, msg.str()});
      }
      if (!all_finite(tr.state) || !all_finite(tr.action) || !std::isfinite(tr.reward) ||
          !all_finite(tr.next_state)) {
        report.push_back({ViolationKind::non_finite, id, t, "non-finite field"});
      }
      if (tr.terminal && t + 1 != traj.size()) {
        report.push_back({ViolationKind::early_terminal, id, t, "terminal flag before last step"});
      }
      if (t + 1 < traj.size() && !bit_equal(tr.next_state, traj.steps[t + 1].state)) {
        report.push_back(
            {ViolationKind::contiguity, id, t, "next_state differs from the following state"});
      }
    }
  }
  return report;
}

double trajectory_return(const Trajectory& traj) {
  double sum = 0.0;
  for (const auto& tr : traj.steps) sum += tr.reward;
  return sum;
}

double mean_return(const Dataset& dataset) {
  if (dataset.trajectories.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : dataset.trajectories) sum += trajectory_return(t);
  return sum / static_cast<double>(dataset.trajectories.size());
}

double trajectory_log_prob(const Trajectory& traj, Factorization mode,
                           const FactorLogDensities& densities) {
  auto checked = [](double v, std::size_t step, const char* factor) {
    if (!std::isfinite(v)) {
      throw std::domain_error(std::string("non-finite ") + factor + " log-density at step " +
                              std::to_string(step));
    }
    return v;
  };
  if (traj.steps.empty()) throw std::invalid_argument("trajectory_log_prob: empty trajectory");

  double logp = checked(densities.initial(traj.initial_state()), 0, "initial");
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const auto& tr = traj.steps[t];
    if (mode == Factorization::policy_dynamics) {
      logp += checked(densities.policy(tr.state, tr.action), t, "policy");
      logp += checked(densities.dynamics(tr.state, tr.action, tr.next_state), t, "dynamics");
    } else {
      logp += checked(densities.forward(tr.state, tr.next_state), t, "forward");
      logp += checked(densities.inverse(tr.state, tr.next_state, tr.action), t, "inverse");
    }
  }
  return logp;
}

}  // namespace ts
