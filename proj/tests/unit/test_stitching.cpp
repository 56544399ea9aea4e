#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "tstitch/env/env.hpp"
#include "tstitch/errors.hpp"
#include "tstitch/state_index.hpp"
#include "tstitch/stitch/stitching.hpp"
#include "support.hpp"

using namespace ts;
using namespace ts::stitch;
using namespace ts::testing;

namespace {

using Occurrence = std::pair<std::uint64_t, std::size_t>;

std::set<Occurrence> as_occurrences(const StateIndex& index, const std::vector<std::size_t>& pos) {
  std::set<Occurrence> out;
  for (auto p : pos) out.insert({index.entries()[p].trajectory, index.entries()[p].step});
  return out;
}

struct Occ {
  std::uint64_t traj;
  std::size_t step;
  StateVec state;
  bool terminal;
};

// Independent listing of state occurrences straight from the trajectories.
std::vector<Occ> occurrences(const Dataset& d) {
  std::vector<Occ> out;
  for (const auto& t : d.trajectories) {
    for (std::size_t k = 0; k < t.steps.size(); ++k) out.push_back({t.id, k, t.steps[k].state, false});
    if (t.steps.back().terminal) out.push_back({t.id, t.steps.size(), t.steps.back().next_state, true});
  }
  return out;
}

double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::set<Occurrence> brute_candidates(const Dataset& d, std::uint64_t traj, std::size_t step, double eps) {
  const auto occ = occurrences(d);
  const auto& tr = d.by_id(traj).steps[step];
  std::set<Occurrence> present, out;
  for (const auto& o : occ) present.insert({o.traj, o.step});
  for (const auto& o : occ) {
    if (!o.terminal && dist(o.state, tr.state) <= eps && present.contains({o.traj, o.step + 1})) {
      out.insert({o.traj, o.step + 1});
    }
    if (dist(o.state, tr.next_state) <= eps) out.insert({o.traj, o.step});
  }
  out.erase({traj, step + 1});
  return out;
}

std::set<std::vector<double>> all_states(const Dataset& d) {
  std::set<std::vector<double>> out;
  for (const auto& t : d.trajectories) {
    for (const auto& tr : t.steps) {
      out.insert(tr.state);
      out.insert(tr.next_state);
    }
  }
  return out;
}

std::string log_text(const StitchLog& log) {
  std::ostringstream os;
  write_log_jsonl(os, log);
  return os.str();
}

models::ValueConfig tiny_value() {
  models::ValueConfig v;
  v.hidden = {16, 16};
  v.epochs = 5;
  v.batch = 32;
  v.seed = 3;
  return v;
}

}  // namespace

TEST_CASE("candidates: epsilon zero on a lone trajectory is empty") {
  const auto d = one_d({chain(1, {0, 1, 2, 3}, {0, 0, 0}, true)});
  const StateIndex index(d, 0.1);
  for (std::size_t k = 0; k < 3; ++k) CHECK(candidate_next_states(index, d, 1, k, 0.0).empty());
}

TEST_CASE("candidates: unbounded epsilon gives every occurrence but the original") {
  const auto d = one_d({chain(1, {0, 1, 2, 3}, {0, 0, 0}, true), chain(2, {5, 6, 7}, {0, 0}, false)});
  const StateIndex index(d, 0.1);
  const auto c = candidate_next_states(index, d, 1, 1, kUnboundedRadius);
  CHECK(c.size() == index.size() - 1);
  CHECK_FALSE(as_occurrences(index, c).contains({1, 2}));
  CHECK_THROWS_AS(candidate_next_states(index, d, 1, 1, -1.0), std::invalid_argument);
}

TEST_CASE("candidates: crossing pointmass paths match the brute-force oracle") {
  Dataset d;
  d.dims = {4, 2};
  for (std::uint64_t id : {0, 1}) {
    Trajectory t{id, {}};
    for (int k = 0; k < 20; ++k) {
      const double u = -1.0 + 0.1 * k, v = u + 0.1;
      const StateVec s = id == 0 ? StateVec{u, 0.02, 1.0, 0.0} : StateVec{0.03, u, 0.0, 1.0};
      const StateVec sn = id == 0 ? StateVec{v, 0.02, 1.0, 0.0} : StateVec{0.03, v, 0.0, 1.0};
      t.steps.push_back({s, {0.0, 0.0}, -0.1, sn, k == 19 && id == 0});
    }
    d.trajectories.push_back(t);
  }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> e(0.0, 1.5);
  for (int trial = 0; trial < 50; ++trial) {
    const double eps = e(rng);
    const StateIndex index(d, 0.1);
    for (std::uint64_t id : {0, 1}) {
      for (std::size_t k = 0; k < 20; k += 3) {
        CAPTURE(eps);
        CHECK(as_occurrences(index, candidate_next_states(index, d, id, k, eps)) == brute_candidates(d, id, k, eps));
      }
    }
  }
}

TEST_CASE("select_stitch_target") {
  CHECK_FALSE(select_stitch_target({}, 0.0));
  const std::vector<CandidateScore> failing{{0, 1, 5.0, false}, {1, 1, 6.0, false}};
  CHECK_FALSE(select_stitch_target(failing, 0.0));
  const std::vector<CandidateScore> c{{0, 1, 1.0, true}, {1, 1, 2.0, true}, {2, 1, 3.0, false}};
  CHECK(select_stitch_target(c, 1.5) == std::optional<std::size_t>{1});
  CHECK_FALSE(select_stitch_target(c, 2.0));
  const std::vector<CandidateScore> tie{{3, 0, 2.0, true}, {1, 4, 2.0, true}, {1, 2, 2.0, true}};
  CHECK(select_stitch_target(tie, 0.0) == std::optional<std::size_t>{2});
}

TEST_CASE("replace_decision") {
  const auto a = chain(1, {0, 1, 2}, {5, 5}, false);
  CHECK_FALSE(replace_decision(a, a, 0.1));
  CHECK_FALSE(replace_decision(a, chain(2, {0, 1, 2}, {5, 6}, false), 0.1));
  CHECK(replace_decision(a, chain(2, {0, 1, 2}, {5, 6.5}, false), 0.1));
}

TEST_CASE("three-trajectory toy: exactly one valid stitch") {
  // Trajectory 0 is 0 -> 1 -> 2 (timeout), 1 -> 7 -> 8 continues trajectory 1 to its terminal
  // end. Trajectory 2 passes through 1 -> 9, and 9 is valuable but implausible.
  // Enumerating every (transition, candidate) pair by hand:
  //   T0 step 0: candidates {1 (T1), 1 (T2)}: value ties the original, rejected.
  //   T0 step 1: candidates {7 (T1 step 2), 9 (T2 step 1)}: 9 fails the gate, 7 beats V(2). Stitch.
  //   T1 step 1: candidate 9 fails the gate.  T2 step 0: candidate 7 < V(9).  Others empty.
  const auto d = one_d({chain(0, {0, 1, 2}, {0, 0}, false), chain(1, {5, 1, 7, 8}, {0, 3, 3}, true),
                        chain(2, {1, 9, 10}, {0, 0}, false)});
  const std::map<double, double> v{{0, 0}, {1, 1}, {2, 0}, {5, 0}, {7, 4}, {8, 5}, {9, 5}, {10, 0}};
  const TableValue vf([&](std::span<const double> s) { return v.at(s[0]); });
  TableModels m;
  m.gate = [](std::span<const double>, std::span<const double> c) { return c[0] != 9.0; };
  StitchConfig cfg;
  cfg.epsilon = 0.5;
  cfg.p_tilde = 0.1;
  IterationLog log;
  const auto out = stitch_pass(d, vf, m, cfg, 1, log);

  REQUIRE(log.events == 1);
  CHECK(log.replaced == 1);
  const auto& t = out.trajectories[0].steps;
  REQUIRE(t.size() == 3);
  CHECK(t[0].state == StateVec{0});
  CHECK(t[1].state == StateVec{1});
  CHECK(t[1].next_state == StateVec{7});
  CHECK(t[1].action == std::vector<double>{6});
  CHECK(t[1].reward == 0.5);
  CHECK(t[2].next_state == StateVec{8});
  CHECK(t[2].terminal);
  CHECK(trajectory_return(out.trajectories[0]) == 3.5);
  CHECK(bit_equal(out.trajectories[1], d.trajectories[1]));
  CHECK(bit_equal(out.trajectories[2], d.trajectories[2]));
  const auto& ev = log.records.at(0);
  CHECK(ev.step == 1);
  CHECK(ev.target_trajectory == 1);
  CHECK(ev.target_step == 2);
  CHECK(ev.original_value == 0.0);
  CHECK(ev.target_value == 4.0);
  CHECK(ev.accepted);
}

TEST_CASE("no passing candidate leaves the dataset untouched") {
  const auto d = lattice_dataset(30, 1, false);
  TableModels m;
  m.gate = [](std::span<const double>, std::span<const double>) { return false; };
  const TableValue vf(lattice_value);
  IterationLog log;
  const auto out = stitch_pass(d, vf, m, StitchConfig{}, 1, log);
  CHECK(log.events == 0);
  CHECK(log.replaced == 0);
  CHECK(bit_equal(out, d));
}

TEST_CASE("identical expert copies are never replaced") {
  std::vector<Trajectory> ts;
  for (std::uint64_t i = 0; i < 6; ++i) ts.push_back(chain(i, {0, 1, 2, 3}, {1, 1, 1}, true));
  const auto d = one_d(ts);
  const TableValue vf([](std::span<const double> s) { return s[0]; });
  TableModels m;
  IterationLog log;
  const auto out = stitch_pass(d, vf, m, StitchConfig{}, 1, log);
  CHECK(log.replaced == 0);
  CHECK(bit_equal(out, d));
}

TEST_CASE("stitch pass properties on random lattice data") {
  const TableValue vf(lattice_value);
  const auto m = lattice_models();
  std::size_t replaced = 0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    CAPTURE(seed);
    const bool positive = seed % 2 == 0;
    const auto d = lattice_dataset(40, seed, positive);
    StitchConfig cfg;
    cfg.epsilon = 0.5;
    cfg.p_tilde = positive ? 0.1 : 0.0;
    cfg.seed = seed;
    IterationLog log;
    const auto out = stitch_pass(d, vf, m, cfg, 1, log);
    CHECK(validate(out).empty());

    const auto before = all_states(d);
    for (const auto& s : all_states(out)) CHECK(before.contains(s));

    for (const auto& ev : log.records) {
      CHECK(ev.target_value > ev.original_value);
      const auto& target = d.by_id(ev.target_trajectory);
      const auto& ts = ev.target_step < target.steps.size() ? target.steps[ev.target_step].state
                                                            : target.steps.back().next_state;
      CHECK(m.gate(ev.source_state, ts));
    }
    for (std::size_t i = 0; i < d.trajectories.size(); ++i) {
      const auto& a = d.trajectories[i];
      const auto& b = out.trajectories[i];
      if (!bit_equal(a, b)) CHECK(trajectory_return(b) > (1.0 + cfg.p_tilde) * trajectory_return(a));
    }
    CHECK(log.mean_return_after >= log.mean_return_before);
    if (log.replaced == 0) CHECK(bit_equal(out, d));

    IterationLog again;
    const auto out2 = stitch_pass(d, vf, m, cfg, 1, again);
    CHECK(bit_equal(out, out2));
    StitchLog l1{{log}}, l2{{again}};
    CHECK(log_text(l1) == log_text(l2));
    replaced += log.replaced;
  }
  CHECK(replaced > 20);
}

TEST_CASE("a second pass over converged data changes nothing") {
  const TableValue vf(lattice_value);
  const auto m = lattice_models();
  StitchConfig cfg;
  cfg.epsilon = 0.5;
  cfg.p_tilde = 0.0;
  auto d = lattice_dataset(40, 3, false);
  for (int i = 1; i <= 20; ++i) {
    IterationLog log;
    auto next = stitch_pass(d, vf, m, cfg, i, log);
    if (log.replaced == 0) {
      IterationLog second;
      stitch_pass(next, vf, m, cfg, i + 1, second);
      CHECK(second.replaced == 0);
      return;
    }
    d = std::move(next);
  }
  FAIL("no fixed point within 20 passes");
}

TEST_CASE("walk respects max_len and the change budget") {
  // Stitching 3 -> 7 moves trajectory 0 onto the longer tail of trajectory 1: 3 + 1 + 3 steps.
  const auto d = one_d({chain(0, {0, 1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}, false),
                        chain(1, {20, 21, 3, 7, 8, 9, 10}, {0, 0, 0, 0, 0, 0}, false)});
  const TableValue vf([](std::span<const double> s) { return s[0]; });
  TableModels m;
  StitchConfig cfg;
  cfg.epsilon = 0.1;
  IterationLog free_log;
  const auto full = stitch_pass(d, vf, m, cfg, 1, free_log);
  CHECK(free_log.events == 1);
  CHECK(free_log.truncated == 0);
  CHECK(full.trajectories[0].size() == 7);

  cfg.max_len = 6;
  IterationLog log;
  const auto cut = stitch_pass(d, vf, m, cfg, 1, log);
  CHECK(log.events == 1);
  CHECK(log.truncated == 1);
  CHECK(cut.trajectories[0].size() == 6);

  cfg.max_len = 5;
  CHECK_THROWS_AS(stitch_pass(d, vf, m, cfg, 1, log), std::invalid_argument);

  cfg.max_len = 0;
  cfg.max_changes = 0;
  IterationLog none;
  CHECK(bit_equal(stitch_pass(d, vf, m, cfg, 1, none), d));
  CHECK(none.events == 0);
}

TEST_CASE("K = 1 equals a single iteration; stored returns never fall across iterations") {
  const auto d = lattice_dataset(40, 11, false);
  const auto m = lattice_models();
  StitchConfig cfg;
  cfg.epsilon = 0.5;
  cfg.p_tilde = 0.0;
  cfg.iterations = 1;
  cfg.seed = 4;
  StitchLog log;
  const auto k1 = run_ts_with(d, m, tiny_value(), cfg, log);
  auto pinned = cfg;
  pinned.max_len = 2 * d.longest_trajectory();
  IterationLog one;
  const auto single = ts_iteration(d, m, tiny_value(), pinned, 1, one);
  CHECK(bit_equal(k1, single));

  cfg.iterations = 4;
  StitchLog many;
  std::vector<Dataset> stages;
  run_ts_with(d, m, tiny_value(), cfg, many, &stages);
  REQUIRE(stages.size() == 4);
  double prev = mean_return(d);
  for (const auto& s : stages) {
    CHECK(mean_return(s) >= prev);
    prev = mean_return(s);
  }
  for (const auto& it : many.iterations) CHECK(std::isfinite(it.value_loss));
}

TEST_CASE("JSONL log round trip and parse errors") {
  const TableValue vf(lattice_value);
  const auto m = lattice_models();
  StitchConfig cfg;
  cfg.epsilon = 0.5;
  StitchLog log;
  log.iterations.emplace_back();
  stitch_pass(lattice_dataset(30, 2, true), vf, m, cfg, 1, log.iterations.back());
  log.iterations.back().value_loss = std::nan("");
  REQUIRE_FALSE(log.iterations.back().records.empty());
  const auto text = log_text(log);
  std::istringstream in(text);
  const auto back = read_log_jsonl(in);
  CHECK(log_text(back) == text);
  CHECK(std::isnan(back.iterations[0].value_loss));

  std::istringstream bad(text.substr(0, text.find('\n') + 1) + "{\"type\": \"event\", \"step\": }\n");
  try {
    read_log_jsonl(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("learned models on pointmass: replacements hold up under re-simulation") {
  const auto env = env::make_env("pointmass");
  const auto d = env::generate_mixed_dataset(env, 10.0, 60, 1.5, 7);
  ModelConfigs mc;
  mc.action_bound = env.action_bound;
  mc.forward.hidden = {64, 64};
  mc.forward.epochs = 30;
  mc.inverse.hidden = {64, 64};
  mc.inverse.epochs = 150;
  mc.inverse.adam.lr = 2e-3;
  mc.reward.kind = models::RewardKind::mlp;
  mc.reward.hidden = {64, 64};
  mc.reward.epochs = 30;
  mc.reward.adam.lr = 1e-3;
  mc.value.hidden = {64, 64};
  mc.value.epochs = 30;
  const auto trained = train_models(d, mc, 1);
  const LearnedModels lm(trained.forward, trained.inverse, trained.reward, models::ZMode::prior_mean);
  StitchConfig cfg;
  cfg.p_tilde = 0.0;
  cfg.iterations = 1;
  StitchLog log;
  const auto out = run_ts_with(d, lm, mc.value, cfg, log);

  std::size_t replaced = 0, ok = 0;
  for (std::size_t i = 0; i < d.trajectories.size(); ++i) {
    if (bit_equal(d.trajectories[i], out.trajectories[i])) continue;
    ++replaced;
    std::vector<double> s = out.trajectories[i].initial_state();
    double ret = 0.0;
    for (const auto& tr : out.trajectories[i].steps) {
      const auto st = env::env_step(env, s, tr.action);
      ret += st.reward;
      s = st.next_state;
      if (st.terminal) break;
    }
    if (ret >= trajectory_return(d.trajectories[i]) - 0.5) ++ok;
  }
  MESSAGE("replaced " << replaced << ", re-simulated within slack " << ok);
  REQUIRE(replaced > 0);
  CHECK(static_cast<double>(ok) >= 0.9 * static_cast<double>(replaced));
}
