#include "tstitch/env/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>

#include <Eigen/LU>

#include "tstitch/io_util.hpp"
#include "tstitch/nn/losses.hpp"

namespace ts::env {

namespace {

double clip(double v, double bound) { return std::clamp(v, -bound, bound); }

void check_dims(const EnvSpec& env, std::span<const double> s, std::span<const double> a) {
  if (s.size() != env.dims.state || a.size() != env.dims.action) {
    throw std::invalid_argument("env_step: expected state width " + std::to_string(env.dims.state) +
                                " and action width " + std::to_string(env.dims.action));
  }
}

std::vector<StateVec> circle_starts(double radius, int count, std::array<double, 2> goal) {
  std::vector<StateVec> out;
  for (int i = 0; i < count; ++i) {
    const double th = 2.0 * std::numbers::pi * i / count;
    out.push_back({goal[0] + radius * std::cos(th), goal[1] + radius * std::sin(th), 0.0, 0.0});
  }
  return out;
}

// Fraction t in [0, 1] along p -> q where it meets segment w, if it does.
std::optional<double> crossing(std::array<double, 2> p, std::array<double, 2> q, const Segment& w) {
  const double rx = q[0] - p[0], ry = q[1] - p[1];
  const double sx = w.b[0] - w.a[0], sy = w.b[1] - w.a[1];
  const double den = rx * sy - ry * sx;
  if (den == 0.0) return std::nullopt;
  const double qx = w.a[0] - p[0], qy = w.a[1] - p[1];
  const double t = (qx * sy - qy * sx) / den;
  const double u = (qx * ry - qy * rx) / den;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

std::vector<double> pd_toward(const EnvSpec& env, std::span<const double> s, std::array<double, 2> target) {
  return {clip(-env.kp * (s[0] - target[0]) - env.kd * s[2], env.action_bound),
          clip(-env.kp * (s[1] - target[1]) - env.kd * s[3], env.action_bound)};
}

}  // namespace

EnvSpec make_env(std::string_view name, const std::map<std::string, double>& params) {
  EnvSpec env;
  env.name = std::string(name);
  double start_radius = 2.0;
  int n_starts = 8;
  auto take = [&](const std::string& key, auto& field) {
    if (auto it = params.find(key); it != params.end()) {
      field = static_cast<std::remove_reference_t<decltype(field)>>(it->second);
      return true;
    }
    return false;
  };
  for (const auto& [key, value] : params) {
    static const char* known[] = {"dt",   "horizon", "goal_x", "goal_y",       "goal_radius", "start_radius",
                                  "starts", "kp",    "kd",     "chain_length", "gamma",       "action_bound"};
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known)) {
      throw std::invalid_argument("unknown env parameter '" + key + "'");
    }
    (void)value;
  }
  take("dt", env.dt);
  take("horizon", env.horizon);
  take("goal_x", env.goal[0]);
  take("goal_y", env.goal[1]);
  take("goal_radius", env.goal_radius);
  take("start_radius", start_radius);
  take("starts", n_starts);
  take("kp", env.kp);
  take("kd", env.kd);
  take("chain_length", env.chain_length);
  take("gamma", env.gamma);
  take("action_bound", env.action_bound);

  if (name == "pointmass" || name == "wallworld") {
    env.kind = name == "pointmass" ? EnvKind::pointmass : EnvKind::wallworld;
    env.dims = {4, 2};
    env.starts = circle_starts(start_radius, n_starts, env.goal);
  } else if (name == "chain") {
    env.kind = EnvKind::chain;
    if (env.chain_length < 2) throw std::invalid_argument("chain_length must be >= 2");
    env.dims = {static_cast<std::size_t>(env.chain_length), 1};
    if (!params.contains("horizon")) env.horizon = 20;
    env.starts = {chain_one_hot(env, 0)};
  } else {
    throw std::invalid_argument("unknown environment '" + std::string(name) + "'");
  }
  if (!(env.action_bound > 0.0) || !(env.dt > 0.0) || env.horizon < 1) {
    throw std::invalid_argument("env parameters out of range");
  }
  return env;
}

StepResult env_step(const EnvSpec& env, std::span<const double> s, std::span<const double> a) {
  check_dims(env, s, a);
  StepResult out;
  if (env.kind == EnvKind::chain) {
    const auto i = chain_state_of(s);
    const auto last = static_cast<std::size_t>(env.chain_length - 1);
    std::size_t j = i;
    if (a[0] >= 0.0) j = std::min(i + 1, last);
    else if (i > 0) j = i - 1;
    out.next_state = chain_one_hot(env, j);
    out.terminal = j == last;
    out.reward = out.terminal ? 1.0 : 0.0;
    return out;
  }
  const double ax = clip(a[0], env.action_bound), ay = clip(a[1], env.action_bound);
  const double dx = s[0] - env.goal[0], dy = s[1] - env.goal[1];
  out.reward = -std::hypot(dx, dy) * env.dt;
  std::array<double, 2> p{s[0], s[1]};
  std::array<double, 2> q{s[0] + s[2] * env.dt, s[1] + s[3] * env.dt};
  double vx = s[2] + ax * env.dt, vy = s[3] + ay * env.dt;
  if (env.kind == EnvKind::wallworld) {
    if (auto t = crossing(p, q, env.wall)) {
      const double back = std::max(0.0, *t - 1e-3);
      q = {p[0] + back * (q[0] - p[0]), p[1] + back * (q[1] - p[1])};
      vx = 0.0;
      vy = 0.0;
    }
  }
  out.next_state = {q[0], q[1], vx, vy};
  out.terminal = std::hypot(q[0] - env.goal[0], q[1] - env.goal[1]) < env.goal_radius;
  return out;
}

std::vector<double> expert_action(const EnvSpec& env, std::span<const double> s) {
  if (s.size() != env.dims.state) throw std::invalid_argument("expert_action: state width");
  switch (env.kind) {
    case EnvKind::pointmass: return pd_toward(env, s, env.goal);
    case EnvKind::wallworld: {
      // Head for the nearer wall end (with clearance) while the straight path is blocked.
      const std::array<double, 2> p{s[0], s[1]};
      if (!crossing(p, env.goal, env.wall)) return pd_toward(env, s, env.goal);
      const auto& w = env.wall;
      const double ex = w.b[0] - w.a[0], ey = w.b[1] - w.a[1];
      const double len = std::hypot(ex, ey);
      const double ux = ex / len, uy = ey / len;
      const double clearance = 0.3;
      const std::array<double, 2> end_a{w.a[0] - ux * clearance, w.a[1] - uy * clearance};
      const std::array<double, 2> end_b{w.b[0] + ux * clearance, w.b[1] + uy * clearance};
      const double da = std::hypot(p[0] - end_a[0], p[1] - end_a[1]);
      const double db = std::hypot(p[0] - end_b[0], p[1] - end_b[1]);
      return pd_toward(env, s, db <= da ? end_b : end_a);
    }
    case EnvKind::chain: {
      static thread_local std::vector<int> cached;
      static thread_local int cached_len = 0;
      static thread_local double cached_gamma = 0.0;
      if (cached_len != env.chain_length || cached_gamma != env.gamma) {
        cached = chain_optimal_actions(env);
        cached_len = env.chain_length;
        cached_gamma = env.gamma;
      }
      return {cached[chain_state_of(s)] == 1 ? 1.0 : -1.0};
    }
  }
  return {};
}

ActionFn expert_policy(const EnvSpec& env) {
  return [env](std::span<const double> s, std::mt19937_64&) { return expert_action(env, s); };
}

ActionFn noisy_expert_policy(const EnvSpec& env, double noise_std) {
  return [env, noise_std](std::span<const double> s, std::mt19937_64& rng) {
    auto a = expert_action(env, s);
    std::normal_distribution<double> normal(0.0, noise_std);
    for (double& v : a) v = clip(v + normal(rng), env.action_bound);
    return a;
  };
}

ActionFn uniform_random_policy(const EnvSpec& env) {
  return [env](std::span<const double>, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-env.action_bound, env.action_bound);
    std::vector<double> a(env.dims.action);
    for (double& v : a) v = u(rng);
    return a;
  };
}

Trajectory rollout(const EnvSpec& env, const ActionFn& policy, std::span<const double> start,
                   std::mt19937_64& rng, std::uint64_t id) {
  Trajectory traj;
  traj.id = id;
  StateVec s(start.begin(), start.end());
  for (int t = 0; t < env.horizon; ++t) {
    auto a = policy(s, rng);
    for (double& v : a) v = clip(v, env.action_bound);
    auto step = env_step(env, s, a);
    traj.steps.push_back({s, a, step.reward, step.next_state, step.terminal});
    if (step.terminal) break;
    s = std::move(step.next_state);
  }
  return traj;
}

Dataset generate_mixed_dataset(const EnvSpec& env, double x_percent, std::size_t n_traj,
                               double noise_std, std::uint64_t seed) {
  if (!(x_percent >= 0.0 && x_percent <= 100.0)) {
    throw std::invalid_argument("x_percent must be in [0, 100]");
  }
  const auto n_expert = static_cast<std::size_t>(std::llround(static_cast<double>(n_traj) * x_percent / 100.0));
  std::vector<std::size_t> order(n_traj);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 pick(derive_seed(seed, 0xd1));
  std::shuffle(order.begin(), order.end(), pick);
  std::vector<bool> is_expert(n_traj, false);
  for (std::size_t i = 0; i < n_expert; ++i) is_expert[order[i]] = true;

  const auto expert = expert_policy(env);
  const auto noisy = noisy_expert_policy(env, noise_std);
  Dataset ds;
  ds.dims = env.dims;
  for (std::size_t i = 0; i < n_traj; ++i) {
    std::mt19937_64 rng(derive_seed(seed, 0xd2, i));
    const auto& start = env.starts[std::uniform_int_distribution<std::size_t>(0, env.starts.size() - 1)(rng)];
    ds.trajectories.push_back(rollout(env, is_expert[i] ? expert : noisy, start, rng, i));
  }
  ds.meta["env"] = env.name;
  ds.meta["x_percent"] = format_real(x_percent);
  ds.meta["n_traj"] = std::to_string(n_traj);
  ds.meta["n_expert"] = std::to_string(n_expert);
  ds.meta["noise_std"] = format_real(noise_std);
  ds.meta["seed"] = std::to_string(seed);
  ds.meta["generator"] = "tstitch-envbench 1";
  return ds;
}

EvalStats evaluate_policy(const EnvSpec& env, const ActionFn& policy, int n_eval, std::uint64_t seed) {
  EvalStats st;
  const auto offset = derive_seed(seed, 0xe7) % env.starts.size();
  for (int i = 0; i < n_eval; ++i) {
    std::mt19937_64 rng(derive_seed(seed, 0xe8, static_cast<std::uint64_t>(i)));
    const auto& start = env.starts[(offset + static_cast<std::size_t>(i)) % env.starts.size()];
    st.returns.push_back(trajectory_return(rollout(env, policy, start, rng)));
  }
  if (n_eval > 0) {
    st.mean = std::accumulate(st.returns.begin(), st.returns.end(), 0.0) / n_eval;
    double ss = 0.0;
    for (double r : st.returns) ss += (r - st.mean) * (r - st.mean);
    st.stddev = std::sqrt(ss / n_eval);
  }
  return st;
}

GaussianPolicyFn expert_gaussian(const EnvSpec& env, double stddev) {
  return [env, stddev](std::span<const double> s) {
    GaussianAction g;
    g.mean = expert_action(env, s);
    g.stddev.assign(g.mean.size(), stddev);
    return g;
  };
}

Estimate kl_to_expert(const EnvSpec& env, const GaussianPolicyFn& expert, const GaussianPolicyFn& policy,
                      int n_rollouts, std::uint64_t seed) {
  std::vector<double> samples;
  const auto offset = derive_seed(seed, 0xc1) % env.starts.size();
  for (int r = 0; r < n_rollouts; ++r) {
    std::mt19937_64 rng(derive_seed(seed, 0xc2, static_cast<std::uint64_t>(r)));
    std::normal_distribution<double> normal;
    StateVec s = env.starts[(offset + static_cast<std::size_t>(r)) % env.starts.size()];
    for (int t = 0; t < env.horizon; ++t) {
      const auto e = expert(s);
      std::vector<double> a(e.mean.size());
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = e.mean[i] + e.stddev[i] * normal(rng);
      const auto p = policy(s);
      samples.push_back(nn::gaussian_log_density(e.mean, e.stddev, a) -
                        nn::gaussian_log_density(p.mean, p.stddev, a));
      auto step = env_step(env, s, a);
      if (step.terminal) break;
      s = std::move(step.next_state);
    }
  }
  Estimate est;
  est.samples = samples.size();
  if (samples.empty()) return est;
  const double n = static_cast<double>(samples.size());
  est.value = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : samples) ss += (v - est.value) * (v - est.value);
  est.stderr_ = samples.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return est;
}

double action_mse(const EnvSpec& env, const ActionFn& expert, const ActionFn& policy, int n_rollouts,
                  std::uint64_t seed) {
  double total = 0.0;
  std::size_t count = 0;
  const auto offset = derive_seed(seed, 0xa1) % env.starts.size();
  for (int r = 0; r < n_rollouts; ++r) {
    std::mt19937_64 rng(derive_seed(seed, 0xa2, static_cast<std::uint64_t>(r)));
    const auto traj = rollout(env, expert, env.starts[(offset + static_cast<std::size_t>(r)) % env.starts.size()], rng);
    for (const auto& tr : traj.steps) {
      const auto a = policy(tr.state, rng);
      const auto e = expert(tr.state, rng);
      for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - e[i]) * (a[i] - e[i]);
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

double pointmass_reference_return(const EnvSpec& env, std::span<const double> start) {
  if (env.kind != EnvKind::pointmass) throw std::invalid_argument("reference return: pointmass only");
  const double dx = env.goal[0] - start[0], dy = env.goal[1] - start[1];
  const double dist = std::hypot(dx, dy);
  if (dist < env.goal_radius) return -dist * env.dt;
  const double ux = dx / dist, uy = dy / dist;
  const double peak = env.action_bound / std::max(std::abs(ux), std::abs(uy));
  // Initial velocity projected on the line; the start set is at rest.
  const double v0 = start[2] * ux + start[3] * uy;
  double best = -std::numeric_limits<double>::infinity();
  constexpr int grid = 400;
  for (int k = 0; k <= env.horizon; ++k) {
    for (int g = 0; g <= grid; ++g) {
      const double c = -peak + 2.0 * peak * g / grid;
      double p = 0.0, v = v0, ret = 0.0;
      for (int t = 0; t < env.horizon; ++t) {
        const double acc = t < k ? peak : c;
        ret -= std::abs(dist - p) * env.dt;
        p += v * env.dt;
        v += acc * env.dt;
        if (std::abs(dist - p) < env.goal_radius) break;
      }
      best = std::max(best, ret);
      if (k == env.horizon) break;
    }
  }
  return best;
}

double reference_return(const EnvSpec& env) {
  double total = 0.0;
  for (const auto& s : env.starts) total += pointmass_reference_return(env, s);
  return total / static_cast<double>(env.starts.size());
}

double normalized_score(double ret, double random_ret, double reference_ret) {
  return (ret - random_ret) / (reference_ret - random_ret);
}

std::size_t chain_state_of(std::span<const double> s) {
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

StateVec chain_one_hot(const EnvSpec& env, std::size_t i) {
  StateVec s(static_cast<std::size_t>(env.chain_length), 0.0);
  s.at(i) = 1.0;
  return s;
}

ChainTables chain_tables(const EnvSpec& env) {
  if (env.kind != EnvKind::chain) throw std::invalid_argument("chain_tables: not a chain env");
  const int n = env.chain_length;
  ChainTables t;
  for (int a = 0; a < 2; ++a) {
    t.transition[a] = nn::Mat::Zero(n, n);
    t.reward[a] = nn::Vec::Zero(n);
    const double act = a == 1 ? 1.0 : -1.0;
    for (int i = 0; i < n - 1; ++i) {
      const auto st = env_step(env, chain_one_hot(env, static_cast<std::size_t>(i)), std::vector<double>{act});
      t.transition[a](i, static_cast<Eigen::Index>(chain_state_of(st.next_state))) = 1.0;
      t.reward[a](i) = st.reward;
    }
  }
  return t;
}

nn::Vec dp_value_oracle(const EnvSpec& env, std::span<const double> p_right) {
  return dp_value_oracle(env, p_right, env.gamma);
}

nn::Vec dp_value_oracle(const EnvSpec& env, std::span<const double> p_right, double gamma) {
  const auto t = chain_tables(env);
  const int n = env.chain_length;
  if (static_cast<int>(p_right.size()) != n) throw std::invalid_argument("dp_value_oracle: one probability per state");
  nn::Mat P(n, n);
  nn::Vec r(n);
  for (int i = 0; i < n; ++i) {
    const double pr = p_right[static_cast<std::size_t>(i)];
    P.row(i) = pr * t.transition[1].row(i) + (1.0 - pr) * t.transition[0].row(i);
    r(i) = pr * t.reward[1](i) + (1.0 - pr) * t.reward[0](i);
  }
  const nn::Mat A = nn::Mat::Identity(n, n) - gamma * P;
  Eigen::FullPivLU<nn::Mat> lu(A);
  if (!lu.isInvertible()) throw std::domain_error("dp_value_oracle: singular policy-evaluation system");
  return lu.solve(r);
}

std::vector<int> chain_optimal_actions(const EnvSpec& env) {
  const auto t = chain_tables(env);
  const int n = env.chain_length;
  nn::Vec v = nn::Vec::Zero(n);
  for (int it = 0; it < 10000; ++it) {
    const nn::Vec q0 = t.reward[0] + env.gamma * t.transition[0] * v;
    const nn::Vec q1 = t.reward[1] + env.gamma * t.transition[1] * v;
    const nn::Vec nv = q0.cwiseMax(q1);
    const double diff = (nv - v).cwiseAbs().maxCoeff();
    v = nv;
    if (diff < 1e-14) break;
  }
  std::vector<int> best(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double q0 = t.reward[0](i) + env.gamma * t.transition[0].row(i).dot(v);
    const double q1 = t.reward[1](i) + env.gamma * t.transition[1].row(i).dot(v);
    best[static_cast<std::size_t>(i)] = q1 >= q0 ? 1 : 0;
  }
  return best;
}

Dataset generate_chain_dataset(const EnvSpec& env, double p_right, std::size_t n_traj, std::uint64_t seed) {
  const ActionFn behaviour = [p_right](std::span<const double>, std::mt19937_64& rng) {
    return std::vector<double>{std::bernoulli_distribution(p_right)(rng) ? 1.0 : -1.0};
  };
  Dataset ds;
  ds.dims = env.dims;
  for (std::size_t i = 0; i < n_traj; ++i) {
    std::mt19937_64 rng(derive_seed(seed, 0xb1, i));
    ds.trajectories.push_back(rollout(env, behaviour, env.starts.front(), rng, i));
  }
  ds.meta["env"] = env.name;
  ds.meta["p_right"] = format_real(p_right);
  ds.meta["seed"] = std::to_string(seed);
  return ds;
}

}  // namespace ts::env
