#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "tstitch/env/env.hpp"
#include "tstitch/errors.hpp"
#include "tstitch/policy/policy.hpp"

using namespace ts;
using namespace ts::policy;

namespace {

constexpr double W[2][3] = {{0.3, -0.2, 0.1}, {-0.1, 0.25, 0.3}};

// One transition per trajectory; a = W s (+ noise). next_state is irrelevant to BC.
Dataset linear_policy_data(std::size_t n, std::uint64_t seed, double noise = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> eps(0.0, 1.0);
  Dataset d;
  d.dims = {3, 2};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s{u(rng), u(rng), u(rng)};
    std::vector<double> a(2);
    for (int r = 0; r < 2; ++r) a[r] = W[r][0] * s[0] + W[r][1] * s[1] + W[r][2] * s[2] + noise * eps(rng);
    d.trajectories.push_back({i, {{s, a, 0.0, s, false}}});
  }
  return d;
}

double held_out_mse(const Policy& p, const Dataset& test) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& t : test.trajectories) {
    for (const auto& tr : t.steps) {
      const auto a = act(p, tr.state);
      for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - tr.action[i]) * (a[i] - tr.action[i]);
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

BcConfig small(int epochs, double lr = 1e-3) {
  BcConfig c;
  c.hidden = {32, 32};
  c.epochs = epochs;
  c.batch = 64;
  c.adam.lr = lr;
  c.seed = 9;
  return c;
}

double window(const std::vector<double>& h, std::size_t at) {
  double s = 0.0;
  for (std::size_t k = at; k < at + 5; ++k) s += h[k];
  return s / 5.0;
}

class ConstantValue final : public models::StateValueFn {
 public:
  double value(std::span<const double>) const override { return 3.0; }
};

}  // namespace

TEST_CASE("BC recovers a linear policy") {
  const auto p = train_bc(linear_policy_data(1000, 1), 1.0, small(60));
  CHECK(held_out_mse(p, linear_policy_data(200, 2)) < 1e-3);
  const auto& h = p.loss_history;
  for (std::size_t at = 5; at + 5 <= h.size(); at += 5) CHECK(window(h, at) <= window(h, at - 5));
}

TEST_CASE("BC memorizes a single repeated pair") {
  Dataset d;
  d.dims = {2, 2};
  for (std::uint64_t i = 0; i < 50; ++i) d.trajectories.push_back({i, {{{0.4, -0.3}, {0.7, -0.2}, 0.0, {0.0, 0.0}, false}}});
  const auto p = train_bc(d, 1.0, small(1500, 3e-3));
  const auto a = act(p, std::vector<double>{0.4, -0.3});
  CHECK(std::abs(a[0] - 0.7) < 1e-3);
  CHECK(std::abs(a[1] + 0.2) < 1e-3);
}

TEST_CASE("weighted BC with constant value is plain BC") {
  const auto d = linear_policy_data(300, 3);
  const ConstantValue v;
  const auto w = value_weights(d, v);
  for (double x : w) CHECK(x == 1.0);
  const auto plain = train_bc(d, 1.0, small(10));
  const auto weighted = train_weighted_bc(d, v, 1.0, small(10));
  double mse = 0.0;
  for (const auto& t : d.trajectories) {
    const auto a = act(plain, t.steps[0].state), b = act(weighted, t.steps[0].state);
    mse += (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
  }
  CHECK(mse / static_cast<double>(d.trajectories.size()) < 1e-6);
}

TEST_CASE("weighted BC follows the heavy cluster at conflicting states") {
  // Same state, two actions; the weighted least-squares optimum is the weighted mean.
  Dataset d;
  d.dims = {2, 1};
  std::vector<double> w;
  const double a1 = 0.6, a2 = -0.6, w1 = 1.0, w2 = 1e-3;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const bool heavy = i % 2 == 0;
    d.trajectories.push_back({i, {{{0.2, 0.1}, {heavy ? a1 : a2}, 0.0, {0.0, 0.0}, false}}});
    w.push_back(heavy ? w1 : w2);
  }
  const double oracle = (w1 * a1 + w2 * a2) / (w1 + w2);
  const auto p = train_bc_weighted(d, w, 1.0, small(400, 3e-3));
  const double got = act(p, std::vector<double>{0.2, 0.1})[0];
  CHECK(std::abs(got - oracle) < 0.05);
  CHECK(std::abs(got - a1) < 0.05);
}

TEST_CASE("weighted BC with zero weights keeps the initialization") {
  const auto d = linear_policy_data(100, 4);
  const std::vector<double> zeros(100, 0.0);
  auto cfg = small(0);
  const auto init = train_bc_weighted(d, zeros, 1.0, cfg);
  cfg.epochs = 5;
  const auto trained = train_bc_weighted(d, zeros, 1.0, cfg);
  CHECK(trained.net.params == init.net.params);
  CHECK_THROWS_AS(train_bc_weighted(d, std::vector<double>(100, -1.0), 1.0, cfg), std::invalid_argument);
  CHECK_THROWS_AS(train_bc_weighted(d, std::vector<double>(3, 1.0), 1.0, cfg), std::invalid_argument);
}

TEST_CASE("Gaussian BC recovers the action noise scale") {
  const auto p = train_gaussian_bc(linear_policy_data(2000, 5, 0.1), 1.0, small(60));
  const auto test = linear_policy_data(100, 6);
  for (const auto& t : test.trajectories) {
    const auto g = action_distribution(p, t.steps[0].state);
    for (double s : g.stddev) {
      CHECK(s >= 0.05);
      CHECK(s <= 0.2);
    }
  }
}

TEST_CASE("Gaussian BC on noiseless data collapses its spread") {
  const auto d = linear_policy_data(500, 7);
  auto cfg = small(100);
  cfg.batch = 500;  // full batch keeps the near-floor NLL from jittering between windows
  const auto p = train_gaussian_bc(d, 1.0, cfg);
  const auto g = action_distribution(p, d.trajectories[0].steps[0].state);
  for (double s : g.stddev) CHECK(s < 0.02);
  const auto& h = p.loss_history;
  for (std::size_t at = 5; at + 5 <= h.size(); at += 5) CHECK(window(h, at) < window(h, at - 5));
}

TEST_CASE("Gaussian BC scores expert data above an untrained net") {
  const auto env = env::make_env("pointmass");
  const auto train = env::generate_mixed_dataset(env, 100.0, 40, 0.1, 1);
  const auto test = env::generate_mixed_dataset(env, 100.0, 10, 0.1, 2);
  const auto fitted = train_gaussian_bc(train, env.action_bound, small(40));
  const auto blank = train_gaussian_bc(train, env.action_bound, small(0));
  double lf = 0.0, lb = 0.0;
  for (const auto& t : test.trajectories) {
    for (const auto& tr : t.steps) {
      lf += log_prob(fitted, tr.state, tr.action);
      lb += log_prob(blank, tr.state, tr.action);
    }
  }
  CHECK(lf > lb);
}

TEST_CASE("act: determinism, reproducible sampling, bounds") {
  const auto d = linear_policy_data(200, 8);
  const auto det = train_bc(d, 0.5, small(5));
  const auto gau = train_gaussian_bc(d, 0.5, small(5));
  const std::vector<double> s{0.1, 0.2, -0.3};
  CHECK(act(det, s) == act(det, s));
  std::mt19937_64 r1(3), r2(3);
  CHECK(act(gau, s, ActMode::sample, &r1) == act(gau, s, ActMode::sample, &r2));
  CHECK_THROWS_AS(act(gau, s, ActMode::sample), std::invalid_argument);
  CHECK_THROWS_AS(act(det, std::vector<double>{0.1}), ShapeError);
  for (double sd : action_distribution(gau, s).stddev) CHECK(sd > 0.0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const auto a = act(det, std::vector<double>{u(rng), u(rng), u(rng)});
    CHECK(std::max(std::abs(a[0]), std::abs(a[1])) <= 0.5);
  }
}

TEST_CASE("policy save/load round trip") {
  const auto d = linear_policy_data(100, 9);
  auto cfg = small(3);
  cfg.holdout = 0.2;
  const auto p = train_gaussian_bc(d, 0.7, cfg);
  REQUIRE(p.best_epoch.has_value());
  const auto path = std::filesystem::temp_directory_path() / "tstitch_policy_test.bin";
  save_policy(path, p);
  const auto q = load_policy(path);
  std::filesystem::remove(path);
  CHECK(q.kind == p.kind);
  CHECK(q.action_bound == p.action_bound);
  const std::vector<double> s{0.3, -0.1, 0.2};
  CHECK(act(q, s) == act(p, s));
  CHECK(action_distribution(q, s).stddev == action_distribution(p, s).stddev);
}
