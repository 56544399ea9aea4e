#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tstitch/data.hpp"
#include "tstitch/nn/mlp.hpp"

namespace ts::env {

enum class EnvKind { pointmass, wallworld, chain };

struct Segment {
  std::array<double, 2> a{};
  std::array<double, 2> b{};
};

/// A deterministic synthetic environment. Pointmass and wallworld states are (x, y, vx, vy)
/// with acceleration actions in the box [-bound, bound]^2; chain states are one-hot.
struct EnvSpec {
  EnvKind kind = EnvKind::pointmass;
  std::string name;
  Dims dims;
  double action_bound = 1.0;
  int horizon = 60;
  double dt = 0.1;
  std::array<double, 2> goal{0.0, 0.0};
  double goal_radius = 0.1;
  Segment wall{{1.0, -0.8}, {1.0, 0.8}};
  int chain_length = 5;
  double gamma = 0.9;  // chain discount used by the tabular oracles
  std::vector<StateVec> starts;  // initial-state set, sampled uniformly
  // Expert PD gains.
  double kp = 3.0;
  double kd = 2.5;
};

/// Builds an env by name with optional numeric overrides (dt, horizon, goal_x, goal_y,
/// goal_radius, start_radius, starts, kp, kd, chain_length, gamma, action_bound).
/// Throws std::invalid_argument for unknown names or keys.
EnvSpec make_env(std::string_view name, const std::map<std::string, double>& params = {});

struct StepResult {
  StateVec next_state;
  double reward = 0.0;
  bool terminal = false;
};

/// Pure transition. Actions are clipped to the box bound first.
StepResult env_step(const EnvSpec& env, std::span<const double> s, std::span<const double> a);

/// Closed-form expert: clipped PD toward the goal (pointmass), toward a waypoint around the
/// wall (wallworld), or the DP-optimal move (chain).
std::vector<double> expert_action(const EnvSpec& env, std::span<const double> s);

using ActionFn = std::function<std::vector<double>(std::span<const double> s, std::mt19937_64& rng)>;

ActionFn expert_policy(const EnvSpec& env);
ActionFn noisy_expert_policy(const EnvSpec& env, double noise_std);
ActionFn uniform_random_policy(const EnvSpec& env);

/// One episode from `start` until a terminal transition or the horizon.
Trajectory rollout(const EnvSpec& env, const ActionFn& policy, std::span<const double> start,
                   std::mt19937_64& rng, std::uint64_t id = 0);

/// round(n_traj * x_percent / 100) noise-free expert trajectories; the rest use
/// a = clip(expert(s) + N(0, noise_std^2)). Starts are drawn from env.starts.
Dataset generate_mixed_dataset(const EnvSpec& env, double x_percent, std::size_t n_traj,
                               double noise_std, std::uint64_t seed);

struct EvalStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> returns;
};

/// n_eval episodes; episode i starts at env.starts[(offset + i) % |starts|] with a seeded offset.
EvalStats evaluate_policy(const EnvSpec& env, const ActionFn& policy, int n_eval, std::uint64_t seed);

/// Diagonal-Gaussian action distribution at a state.
struct GaussianAction {
  std::vector<double> mean;
  std::vector<double> stddev;
};
using GaussianPolicyFn = std::function<GaussianAction(std::span<const double> s)>;

/// Expert mean with a fixed standard deviation on every action dimension.
GaussianPolicyFn expert_gaussian(const EnvSpec& env, double stddev = 0.01);

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
};

/// Monte-Carlo D_KL(expert || policy): states from expert-Gaussian rollouts, one expert action
/// sample per state, averaging log expert(a|s) - log policy(a|s).
Estimate kl_to_expert(const EnvSpec& env, const GaussianPolicyFn& expert, const GaussianPolicyFn& policy,
                      int n_rollouts, std::uint64_t seed);

/// Mean squared action difference over states visited by expert rollouts.
double action_mse(const EnvSpec& env, const ActionFn& expert, const ActionFn& policy, int n_rollouts,
                  std::uint64_t seed);

// -- reference returns ------------------------------------------------------------------------

/// Pointmass: best return over straight-line controls that accelerate at the maximum
/// admissible rate for k steps and then apply one constant along-line acceleration, searched
/// over k and a fine grid. Used as the optimum reference.
double pointmass_reference_return(const EnvSpec& env, std::span<const double> start);

/// Mean reference return over env.starts (pointmass only).
double reference_return(const EnvSpec& env);

/// (R - R_random) / (R_reference - R_random).
double normalized_score(double ret, double random_ret, double reference_ret);

// -- chain tables -----------------------------------------------------------------------------

/// Exact tabular form: transition[a](s, s') and expected reward[a](s) for a in {left, right}.
/// The terminal state has an all-zero row.
struct ChainTables {
  std::array<nn::Mat, 2> transition;
  std::array<nn::Vec, 2> reward;
};

ChainTables chain_tables(const EnvSpec& env);
std::size_t chain_state_of(std::span<const double> s);
StateVec chain_one_hot(const EnvSpec& env, std::size_t i);

/// V = (I - gamma P_pi)^-1 r_pi for a behaviour giving P(right | s) per state. Throws
/// std::domain_error when the system is singular.
nn::Vec dp_value_oracle(const EnvSpec& env, std::span<const double> p_right);
/// Same with an explicit discount.
nn::Vec dp_value_oracle(const EnvSpec& env, std::span<const double> p_right, double gamma);

/// Greedy action index per state (0 left, 1 right) from value iteration.
std::vector<int> chain_optimal_actions(const EnvSpec& env);

/// Dataset of chain episodes from a stochastic behaviour with P(right) = p_right everywhere.
Dataset generate_chain_dataset(const EnvSpec& env, double p_right, std::size_t n_traj, std::uint64_t seed);

}  // namespace ts::env
