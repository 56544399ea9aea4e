#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "support.hpp"
#include "tstitch/data.hpp"
#include "tstitch/dataset_io.hpp"
#include "tstitch/errors.hpp"
#include "tstitch/state_index.hpp"

using namespace ts;

namespace {

Dataset two_step() {
  Dataset ds;
  ds.dims = {2, 1};
  Trajectory t;
  t.id = 0;
  t.steps.push_back({{0.0, 1.0}, {0.5}, 1.0, {0.25, 1.5}, false});
  t.steps.push_back({{0.25, 1.5}, {-0.5}, 2.0, {0.1, 0.2}, true});
  ds.trajectories.push_back(t);
  return ds;
}

Trajectory with_rewards(std::vector<double> rs) {
  Trajectory t;
  for (double r : rs) t.steps.push_back({{0.0}, {0.0}, r, {0.0}, false});
  return t;
}

}  // namespace

TEST_CASE("text codec: empty dataset keeps only the header") {
  Dataset ds;
  ds.dims = {3, 2};
  std::stringstream buf;
  write_text(buf, ds);
  const auto text = buf.str();
  CHECK(text.rfind("TSDS v1 dS=3 dA=2", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  const auto back = read_text(buf);
  CHECK(back.dims == ds.dims);
  CHECK(back.trajectories.empty());
}

TEST_CASE("text and binary codecs reproduce a two-step trajectory") {
  const auto ds = two_step();
  std::stringstream t, b;
  write_text(t, ds);
  write_binary(b, ds);
  CHECK(bit_equal(read_text(t), ds));
  CHECK(bit_equal(read_binary(b), ds));
}

TEST_CASE("binary codec is bit-exact on 100 random trajectories") {
  auto ds = testing::random_dataset(100, 4, 2, 30, 17);
  ds.meta["env"] = "random";
  std::stringstream b;
  write_binary(b, ds);
  const auto back = read_binary(b);
  REQUIRE(bit_equal(back, ds));
  double max_diff = 0.0;
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    for (std::size_t k = 0; k < ds.trajectories[i].size(); ++k) {
      const auto& x = ds.trajectories[i].steps[k];
      const auto& y = back.trajectories[i].steps[k];
      for (std::size_t d = 0; d < x.state.size(); ++d) max_diff = std::max(max_diff, std::abs(x.state[d] - y.state[d]));
      max_diff = std::max(max_diff, std::abs(x.reward - y.reward));
    }
  }
  CHECK(max_diff == 0.0);
  CHECK(back.meta == ds.meta);
}

TEST_CASE("text codec round-trips shortest decimals exactly") {
  const auto ds = testing::random_dataset(20, 3, 2, 10, 5);
  std::stringstream t;
  write_text(t, ds);
  CHECK(bit_equal(read_text(t), ds));
}

TEST_CASE("file helpers choose the form by extension and report missing files") {
  const auto dir = std::filesystem::temp_directory_path() / "tstitch_core_data";
  std::filesystem::create_directories(dir);
  const auto ds = testing::random_dataset(5, 2, 1, 6, 3);
  save_dataset(dir / "d.txt", ds);
  save_dataset(dir / "d.tsds", ds);
  CHECK(bit_equal(load_dataset(dir / "d.txt"), ds));
  CHECK(bit_equal(load_dataset(dir / "d.tsds"), ds));
  std::ifstream head(dir / "d.tsds", std::ios::binary);
  char magic[4];
  head.read(magic, 4);
  CHECK(std::string(magic, 4) == "TSDS");
  CHECK_THROWS_AS(load_dataset(dir / "absent.tsds"), MissingArtifact);
}

TEST_CASE("text parser names the offending line") {
  std::stringstream bad("TSDS v1 dS=1 dA=1\n0 0 1.0 2.0 3.0 4.0 0\n0 1 4.0 x 1.0 2.0 1\n");
  try {
    read_text(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::stringstream wide("TSDS v1 dS=1 dA=1\n0 0 1.0 2.0 3.0 4.0 0 9\n");
  CHECK_THROWS_AS(read_text(wide), SchemaError);
  std::stringstream header("TSDX v1 dS=1 dA=1\n");
  CHECK_THROWS_AS(read_text(header), ParseError);
}

TEST_CASE("binary reader rejects truncated input") {
  std::stringstream b;
  write_binary(b, two_step());
  auto bytes = b.str();
  bytes.resize(bytes.size() - 20);
  std::stringstream cut(bytes);
  CHECK_THROWS_AS(read_binary(cut), ParseError);
}

TEST_CASE("validate reports each broken invariant with its location") {
  auto ds = two_step();
  CHECK(validate(ds).empty());

  auto broken = ds;
  broken.trajectories[0].steps[0].next_state[0] = 9.0;
  auto r = validate(broken);
  REQUIRE(r.size() == 1);
  CHECK(r[0].kind == ViolationKind::contiguity);
  CHECK(r[0].trajectory == 0);
  CHECK(r[0].step == 0);

  auto nan = testing::random_dataset(1, 2, 1, 1, 1);
  nan.trajectories[0].steps.resize(1);
  for (int k = 1; k < 5; ++k) {
    auto& last = nan.trajectories[0].steps.back();
    nan.trajectories[0].steps.push_back({last.next_state, {0.0}, 0.0, {1.0 * k, 0.0}, false});
  }
  for (auto& s : nan.trajectories[0].steps) s.terminal = false;
  nan.trajectories[0].steps[3].reward = std::numeric_limits<double>::quiet_NaN();
  r = validate(nan);
  REQUIRE(r.size() == 1);
  CHECK(r[0].kind == ViolationKind::non_finite);
  CHECK(r[0].step == 3);

  auto early = ds;
  early.trajectories[0].steps[0].terminal = true;
  r = validate(early);
  REQUIRE(r.size() == 1);
  CHECK(r[0].kind == ViolationKind::early_terminal);

  auto dup = ds;
  dup.trajectories.push_back(ds.trajectories[0]);
  r = validate(dup);
  REQUIRE(r.size() == 1);
  CHECK(r[0].kind == ViolationKind::duplicate_id);

  auto dim = ds;
  dim.trajectories[0].steps[1].action = {1.0, 2.0};
  r = validate(dim);
  REQUIRE(r.size() == 1);
  CHECK(r[0].kind == ViolationKind::dimension);

  auto empty = ds;
  empty.trajectories[0].steps.clear();
  r = validate(empty);
  REQUIRE(r.size() == 1);
  CHECK(r[0].kind == ViolationKind::empty_trajectory);
}

TEST_CASE("trajectory_return sums rewards in order") {
  CHECK(trajectory_return(with_rewards({1, 2, 3})) == 6.0);
  CHECK(trajectory_return(with_rewards({0})) == 0.0);

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  std::vector<double> rs(1000);
  double abs_sum = 0.0;
  for (double& r : rs) abs_sum += std::abs(r = u(rng));
  const double oracle = testing::compensated_sum(rs);
  CHECK(std::abs(trajectory_return(with_rewards(rs)) - oracle) < 1e-12 * abs_sum);
}

TEST_CASE("trajectory_log_prob: trivial factors") {
  Trajectory t = with_rewards({0, 0, 0});
  FactorLogDensities f;
  f.initial = [](std::span<const double>) { return 0.0; };
  f.policy = [](std::span<const double>, std::span<const double>) { return 0.0; };
  f.dynamics = [](std::span<const double>, std::span<const double>, std::span<const double>) { return 0.0; };
  CHECK(trajectory_log_prob(t, Factorization::policy_dynamics, f) == 0.0);

  int calls = 0;
  f.policy = [&calls](std::span<const double>, std::span<const double>) {
    return calls++ == 1 ? std::log(0.5) : 0.0;
  };
  CHECK(trajectory_log_prob(t, Factorization::policy_dynamics, f) == doctest::Approx(std::log(0.5)).epsilon(1e-15));

  f.dynamics = [](std::span<const double>, std::span<const double>, std::span<const double>) {
    return -std::numeric_limits<double>::infinity();
  };
  CHECK_THROWS_AS(trajectory_log_prob(t, Factorization::policy_dynamics, f), std::domain_error);
}

TEST_CASE("both factorisations agree on exact tabular MDPs") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const int S = 3 + static_cast<int>(seed % 3);
    const auto mdp = testing::random_mdp(S, 2, seed);
    const auto f = testing::exact_factors(mdp);
    double worst = 0.0;
    for (int len = 1; len <= 3; ++len) {
      for (const auto& t : testing::enumerate_trajectories(mdp, len)) {
        const double a = trajectory_log_prob(t, Factorization::policy_dynamics, f);
        const double b = trajectory_log_prob(t, Factorization::forward_inverse, f);
        worst = std::max(worst, std::abs(a - b));
      }
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("state index: entries and exact-match queries") {
  const auto ds = two_step();
  const StateIndex index(ds);
  // Two transition states plus the terminal next_state.
  REQUIRE(index.size() == 3);
  CHECK(index.entries()[2].terminal);
  CHECK(index.entries()[2].step == 2);
  const auto hit = index.radius_query(std::vector<double>{0.25, 1.5}, 0.0);
  REQUIRE(hit.size() == 1);
  CHECK(index.entries()[hit[0]].step == 1);
  CHECK(index.radius_query(std::vector<double>{5.0, 5.0}, kUnboundedRadius).size() == 3);
  CHECK(index.find(0, 1) == 1);
  CHECK(index.find(0, 7) == StateIndex::npos);
  CHECK(index.find(4, 0) == StateIndex::npos);
}

TEST_CASE("state index: timeout next_states are not indexed") {
  auto ds = two_step();
  ds.trajectories[0].steps[1].terminal = false;
  CHECK(StateIndex(ds).size() == 2);
}

TEST_CASE("state index radius query equals the linear scan") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t dims : {2u, 3u, 20u}) {
    Dataset ds;
    ds.dims = {dims, 1};
    for (std::size_t i = 0; i < 500; ++i) {
      std::vector<double> s(dims), n(dims);
      for (auto& x : s) x = u(rng);
      for (auto& x : n) x = u(rng);
      ds.trajectories.push_back({i, {{s, {0.0}, 0.0, n, false}}});
    }
    const StateIndex index(ds, 0.1);
    for (int q = 0; q < 100; ++q) {
      std::vector<double> c(dims);
      for (auto& x : c) x = u(rng);
      const double eps = std::abs(u(rng)) * (dims > 3 ? 2.0 : 0.5);
      const auto got = index.radius_query(c, eps);
      CHECK(got == linear_radius_query(index.entries(), c, eps));
      CHECK(std::is_sorted(got.begin(), got.end()));
    }
  }
}
