#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "tstitch/data.hpp"
#include "tstitch/nn/grad_check.hpp"
#include "tstitch/nn/losses.hpp"
#include "tstitch/nn/mlp.hpp"
#include "tstitch/stitch/stitching.hpp"

namespace ts::testing {

/// Valid dataset with contiguous random trajectories; the last step of roughly half of them is
/// terminal.
Dataset random_dataset(std::size_t n_traj, std::size_t dS, std::size_t dA, std::size_t max_len,
                       std::uint64_t seed);

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> xs);

// -- tabular MDPs ---------------------------------------------------------------------------

/// Finite MDP with strictly positive initial, policy and transition probabilities.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> initial;     // [s]
  std::vector<double> policy;      // [s * A + a]
  std::vector<double> transition;  // [(s * A + a) * S + s']

  double pi(int s, int a) const { return policy[static_cast<std::size_t>(s * n_actions + a)]; }
  double p(int s, int a, int sn) const {
    return transition[static_cast<std::size_t>((s * n_actions + a) * n_states + sn)];
  }
  double forward(int s, int sn) const;                // sum_a pi(a|s) p(s'|s,a)
  double inverse(int s, int sn, int a) const;         // pi(a|s) p(s'|s,a) / forward(s, s')
};

TabularMdp random_mdp(int n_states, int n_actions, std::uint64_t seed);

/// Exact factor log-densities on trajectories whose states/actions hold the index as a single real.
FactorLogDensities exact_factors(const TabularMdp& mdp);

/// Every trajectory of exactly `length` steps (states and actions enumerated).
std::vector<Trajectory> enumerate_trajectories(const TabularMdp& mdp, int length);

// -- gradient check cases ---------------------------------------------------------------------

/// A loss over a flat parameter vector built from one of the fixed loss kinds on small
/// random networks, evaluated away from relu kinks.
struct LossCase {
  nn::LossFunction loss;
  std::vector<double> point;
};

LossCase make_loss_case(nn::LossKind kind, std::uint64_t seed);

/// Largest grad-check relative error over `trials` seeded cases of `kind`.
double worst_grad_error(nn::LossKind kind, int trials, std::uint64_t seed);


// -- stitching fixtures -------------------------------------------------------------------------

// States are exact lattice points so stitch targets can be shared bit-for-bit.
class TableValue final : public models::StateValueFn {
 public:
  explicit TableValue(std::function<double(std::span<const double>)> f) : f_(std::move(f)) {}
  double value(std::span<const double> s) const override { return f_(s); }

 private:
  std::function<double(std::span<const double>)> f_;
};

class TableModels final : public stitch::TransitionModels {
 public:
  std::function<bool(std::span<const double>, std::span<const double>)> gate =
      [](std::span<const double>, std::span<const double>) { return true; };
  double stitched_reward = 0.5;

  std::vector<bool> plausible(std::span<const double> s, std::span<const double>,
                              const std::vector<std::span<const double>>& c) const override {
    std::vector<bool> out;
    for (const auto& x : c) out.push_back(gate(s, x));
    return out;
  }
  std::vector<double> action(std::span<const double> s, std::span<const double> sn,
                             std::mt19937_64&) const override {
    std::vector<double> a(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) a[i] = sn[i] - s[i];
    return a;
  }
  double reward(std::span<const double>, std::span<const double>, std::span<const double>,
                std::mt19937_64&) const override {
    return stitched_reward;
  }
};

// 1-D trajectory through the listed states with the listed rewards.
Trajectory chain(std::uint64_t id, std::vector<double> states, std::vector<double> rewards, bool terminal);
Dataset one_d(std::vector<Trajectory> ts);

// Random walks on the integer lattice {0..4}^2; terminal on reaching (4, 4).
Dataset lattice_dataset(std::size_t n, std::uint64_t seed, bool positive_rewards);
double lattice_value(std::span<const double> s);
/// Deterministic pseudo-random gate verdict per (s, candidate) pair.
TableModels lattice_models();

}  // namespace ts::testing
