#include "tstitch/stitch/stitching.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "tstitch/errors.hpp"
#include "tstitch/io_util.hpp"
#include "tstitch/parallel.hpp"

namespace ts::stitch {

std::vector<bool> LearnedModels::plausible(std::span<const double> s,
                                           std::span<const double> original_next,
                                           const std::vector<std::span<const double>>& candidates) const {
  const auto g = models::predict_members(forward_, s);
  const auto orig = models::member_log_density(g, original_next);
  std::vector<bool> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(models::likelihood_gate(models::member_log_density(g, c), orig));
  return out;
}

std::vector<double> LearnedModels::action(std::span<const double> s, std::span<const double> s_next,
                                          std::mt19937_64& rng) const {
  return models::generate_action(inverse_, s, s_next, z_mode_, &rng);
}

double LearnedModels::reward(std::span<const double> s, std::span<const double> a,
                             std::span<const double> s_next, std::mt19937_64& rng) const {
  return models::predict_reward(reward_, s, a, s_next, z_mode_, &rng);
}

namespace {

std::vector<std::size_t> candidates_for(const StateIndex& index, std::uint64_t trajectory,
                                        std::size_t step, std::span<const double> state,
                                        std::span<const double> next_state, double epsilon) {
  const auto& entries = index.entries();
  std::vector<std::size_t> out;
  for (auto e : index.radius_query(state, epsilon)) {
    if (entries[e].terminal) continue;
    const auto succ = index.find(entries[e].trajectory, entries[e].step + 1);
    if (succ != StateIndex::npos) out.push_back(succ);
  }
  const auto near_next = index.radius_query(next_state, epsilon);
  out.insert(out.end(), near_next.begin(), near_next.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  const auto original = index.find(trajectory, step + 1);
  if (original != StateIndex::npos) {
    if (auto it = std::lower_bound(out.begin(), out.end(), original); it != out.end() && *it == original) {
      out.erase(it);
    }
  }
  return out;
}

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

std::unordered_map<std::uint64_t, std::size_t> position_map(const Dataset& dataset) {
  std::unordered_map<std::uint64_t, std::size_t> m;
  for (std::size_t i = 0; i < dataset.trajectories.size(); ++i) m.emplace(dataset.trajectories[i].id, i);
  return m;
}

}  // namespace

std::vector<std::size_t> candidate_next_states(const StateIndex& index, const Dataset& dataset,
                                               std::uint64_t trajectory, std::size_t step,
                                               double epsilon) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("candidate_next_states: epsilon must be >= 0");
  const auto& t = dataset.by_id(trajectory).steps.at(step);
  return candidates_for(index, trajectory, step, t.state, t.next_state, epsilon);
}

std::optional<std::size_t> select_stitch_target(std::span<const CandidateScore> candidates,
                                                double original_value) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (!c.gate_passed || !(c.value > original_value)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = candidates[*best];
    if (c.value > b.value ||
        (c.value == b.value && std::tie(c.trajectory, c.step) < std::tie(b.trajectory, b.step))) {
      best = i;
    }
  }
  return best;
}

std::vector<double> index_values(const StateIndex& index, const models::StateValueFn& value_fn) {
  const auto& entries = index.entries();
  if (entries.empty()) return {};
  nn::Mat states(static_cast<Eigen::Index>(entries.front().state.size()),
                 static_cast<Eigen::Index>(entries.size()));
  for (std::size_t j = 0; j < entries.size(); ++j) {
    for (std::size_t i = 0; i < entries[j].state.size(); ++i) {
      states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = entries[j].state[i];
    }
  }
  return value_fn.values(states);
}

StitchResult stitch_trajectory(const Trajectory& traj, const StitchContext& ctx, std::mt19937_64& rng) {
  const auto& dataset = ctx.dataset;
  const auto& index = ctx.index;
  const auto& entries = index.entries();
  const auto& cfg = ctx.cfg;
  const std::size_t max_len = cfg.max_len ? cfg.max_len : 2 * dataset.longest_trajectory();
  auto locate = [&](std::uint64_t id) -> const Trajectory& {
    if (ctx.positions) return dataset.trajectories[ctx.positions->at(id)];
    return dataset.by_id(id);
  };

  StitchResult result;
  result.trajectory.id = traj.id;
  std::set<std::pair<std::uint64_t, std::size_t>> visited{{traj.id, 0}};
  const Trajectory* cur = &traj;
  std::size_t k = 0;
  int changes = 0;

  while (true) {
    if (result.trajectory.steps.size() >= max_len) {
      result.truncated = true;
      break;
    }
    const Transition& t = cur->steps[k];
    const bool may_stitch = !cfg.max_changes || changes < *cfg.max_changes;
    std::optional<std::size_t> chosen;
    double original_value = 0.0;
    std::vector<std::size_t> cands;
    if (may_stitch) {
      cands = candidates_for(index, cur->id, k, t.state, t.next_state, cfg.epsilon);
      std::erase_if(cands, [&](std::size_t e) {
        return visited.contains({entries[e].trajectory, entries[e].step});
      });
      if (cands.size() > cfg.candidate_cap) {
        std::stable_sort(cands.begin(), cands.end(), [&](std::size_t a, std::size_t b) {
          return ctx.entry_values[a] > ctx.entry_values[b];
        });
        cands.resize(cfg.candidate_cap);
        std::sort(cands.begin(), cands.end());
      }
    }
    if (!cands.empty()) {
      const auto orig_pos = index.find(cur->id, k + 1);
      original_value = orig_pos != StateIndex::npos ? ctx.entry_values[orig_pos]
                                                    : ctx.value_fn.value(t.next_state);
      // Only candidates that could beat the original need the gate.
      std::vector<std::size_t> live;
      for (auto e : cands) {
        if (ctx.entry_values[e] > original_value) live.push_back(e);
      }
      if (!live.empty()) {
        std::vector<std::span<const double>> views;
        views.reserve(live.size());
        for (auto e : live) views.emplace_back(entries[e].state);
        const auto gate = ctx.models.plausible(t.state, t.next_state, views);
        std::vector<CandidateScore> scores;
        scores.reserve(live.size());
        for (std::size_t i = 0; i < live.size(); ++i) {
          const auto& e = entries[live[i]];
          scores.push_back({e.trajectory, e.step, ctx.entry_values[live[i]], gate[i]});
        }
        if (auto pick = select_stitch_target(scores, original_value)) chosen = live[*pick];
      }
    }

    if (chosen) {
      const auto& target = entries[*chosen];
      Transition st;
      st.state = t.state;
      st.action = ctx.models.action(t.state, target.state, rng);
      st.next_state = target.state;
      st.reward = ctx.models.reward(st.state, st.action, st.next_state, rng);
      st.terminal = target.terminal;
      StitchEvent ev;
      ev.trajectory = traj.id;
      ev.step = result.trajectory.steps.size();
      ev.source_state = t.state;
      ev.target_trajectory = target.trajectory;
      ev.target_step = target.step;
      ev.original_value = original_value;
      ev.target_value = ctx.entry_values[*chosen];
      ev.action_norm = l2_norm(st.action);
      ev.predicted_reward = st.reward;
      result.events.push_back(std::move(ev));
      result.trajectory.steps.push_back(std::move(st));
      ++changes;
      visited.insert({target.trajectory, target.step});
      if (target.terminal) break;
      cur = &locate(target.trajectory);
      k = target.step;
      continue;
    }

    result.trajectory.steps.push_back(t);
    visited.insert({cur->id, k + 1});
    if (t.terminal || k + 1 >= cur->steps.size()) break;
    ++k;
  }
  return result;
}

bool replace_decision(const Trajectory& old_traj, const Trajectory& new_traj, double p_tilde) {
  return (1.0 + p_tilde) * trajectory_return(old_traj) < trajectory_return(new_traj);
}

Dataset stitch_pass(const Dataset& dataset, const models::StateValueFn& value_fn,
                    const TransitionModels& models, const StitchConfig& cfg, int iteration,
                    IterationLog& log) {
  if (!(cfg.epsilon >= 0.0)) throw std::invalid_argument("stitch: epsilon must be >= 0");
  if (cfg.max_len != 0 && cfg.max_len < dataset.longest_trajectory()) {
    throw std::invalid_argument("stitch: max_len is shorter than the longest trajectory");
  }
  const StateIndex index(dataset, cfg.epsilon > 0.0 ? cfg.epsilon : 0.1);
  const auto values = index_values(index, value_fn);
  const auto positions = position_map(dataset);
  const StitchContext ctx{dataset, index, values, value_fn, models, cfg, &positions};

  const auto n = dataset.trajectories.size();
  std::vector<StitchResult> results(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& traj = dataset.trajectories[i];
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(iteration), traj.id));
    results[i] = stitch_trajectory(traj, ctx, rng);
  });

  Dataset out = dataset;
  log.iteration = iteration;
  log.trajectories = n;
  log.mean_return_before = mean_return(dataset);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = results[i];
    log.events += r.events.size();
    log.truncated += r.truncated ? 1 : 0;
    const bool replace = !r.events.empty() &&
                         replace_decision(dataset.trajectories[i], r.trajectory, cfg.p_tilde);
    if (replace) {
      ++log.replaced;
      log.accepted_events += r.events.size();
      if (trajectory_return(dataset.trajectories[i]) < 0.0) ++log.negative_margin;
      out.trajectories[i] = std::move(r.trajectory);
    }
    for (auto& ev : r.events) {
      ev.accepted = replace;
      log.records.push_back(std::move(ev));
    }
  }
  log.mean_return_after = mean_return(out);
  return out;
}

Dataset ts_iteration(const Dataset& dataset, const TransitionModels& models,
                     const models::ValueConfig& value_cfg, const StitchConfig& cfg, int iteration,
                     IterationLog& log) {
  auto vcfg = value_cfg;
  vcfg.seed = derive_seed(value_cfg.seed, 0x7a, static_cast<std::uint64_t>(iteration));
  const auto vf = models::train_value(dataset, vcfg);
  auto out = stitch_pass(dataset, vf, models, cfg, iteration, log);
  log.value_loss = vf.loss_history.empty() ? std::numeric_limits<double>::quiet_NaN()
                                           : vf.loss_history.back();
  return out;
}

TrainedModels train_models(const Dataset& dataset, const ModelConfigs& cfgs, std::uint64_t seed) {
  auto fcfg = cfgs.forward;
  fcfg.seed = derive_seed(seed, 0x51);
  auto icfg = cfgs.inverse;
  icfg.seed = derive_seed(seed, 0x52);
  auto rcfg = cfgs.reward;
  rcfg.seed = derive_seed(seed, 0x53);
  TrainedModels m;
  m.forward = models::train_forward_ensemble(dataset, fcfg);
  m.inverse = models::train_inverse_cvae(dataset, cfgs.action_bound, icfg);
  m.reward = models::train_reward_model(dataset, rcfg);
  return m;
}

Dataset run_ts_with(const Dataset& dataset, const TransitionModels& models,
                    const models::ValueConfig& value_cfg, const StitchConfig& cfg, StitchLog& log,
                    std::vector<Dataset>* per_iteration) {
  if (cfg.iterations < 1) throw std::invalid_argument("stitch: iterations must be >= 1");
  const std::size_t max_len = cfg.max_len ? cfg.max_len : 2 * dataset.longest_trajectory();
  auto fixed = cfg;
  fixed.max_len = max_len;  // pinned to the input so later iterations cannot grow the cap
  Dataset cur = dataset;
  for (int k = 1; k <= cfg.iterations; ++k) {
    IterationLog it;
    cur = ts_iteration(cur, models, value_cfg, fixed, k, it);
    log.iterations.push_back(std::move(it));
    if (per_iteration) per_iteration->push_back(cur);
  }
  return cur;
}

Dataset run_ts(const Dataset& dataset, const StitchConfig& cfg, const ModelConfigs& cfgs,
               StitchLog& log) {
  const auto trained = train_models(dataset, cfgs, cfg.seed);
  const LearnedModels models(trained.forward, trained.inverse, trained.reward, cfg.z_mode);
  auto vcfg = cfgs.value;
  vcfg.seed = derive_seed(cfg.seed, 0x54);
  return run_ts_with(dataset, models, vcfg, cfg, log);
}

void write_log_jsonl(std::ostream& out, const StitchLog& log) {
  for (const auto& it : log.iterations) {
    nlohmann::json j = {{"type", "iteration"},
                        {"iteration", it.iteration},
                        {"trajectories", it.trajectories},
                        {"replaced", it.replaced},
                        {"events", it.events},
                        {"accepted_events", it.accepted_events},
                        {"truncated", it.truncated},
                        {"negative_margin", it.negative_margin},
                        {"mean_return_before", it.mean_return_before},
                        {"mean_return_after", it.mean_return_after}};
    j["value_loss"] = std::isfinite(it.value_loss) ? nlohmann::json(it.value_loss) : nlohmann::json();
    out << j.dump() << '\n';
    for (const auto& ev : it.records) {
      const nlohmann::json e = {{"type", "event"},
                                {"iteration", it.iteration},
                                {"trajectory", ev.trajectory},
                                {"step", ev.step},
                                {"source_state", ev.source_state},
                                {"target_trajectory", ev.target_trajectory},
                                {"target_step", ev.target_step},
                                {"original_value", ev.original_value},
                                {"target_value", ev.target_value},
                                {"action_norm", ev.action_norm},
                                {"predicted_reward", ev.predicted_reward},
                                {"accepted", ev.accepted}};
      out << e.dump() << '\n';
    }
  }
}

StitchLog read_log_jsonl(std::istream& in) {
  StitchLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "iteration") {
        IterationLog it;
        it.iteration = j.at("iteration").get<int>();
        it.trajectories = j.at("trajectories").get<std::size_t>();
        it.replaced = j.at("replaced").get<std::size_t>();
        it.events = j.at("events").get<std::size_t>();
        it.accepted_events = j.at("accepted_events").get<std::size_t>();
        it.truncated = j.at("truncated").get<std::size_t>();
        it.negative_margin = j.at("negative_margin").get<std::size_t>();
        it.mean_return_before = j.at("mean_return_before").get<double>();
        it.mean_return_after = j.at("mean_return_after").get<double>();
        it.value_loss = j.at("value_loss").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                     : j.at("value_loss").get<double>();
        log.iterations.push_back(std::move(it));
      } else if (type == "event") {
        if (log.iterations.empty()) throw ParseError("event before any iteration record", lineno);
        StitchEvent ev;
        ev.trajectory = j.at("trajectory").get<std::uint64_t>();
        ev.step = j.at("step").get<std::size_t>();
        ev.source_state = j.at("source_state").get<StateVec>();
        ev.target_trajectory = j.at("target_trajectory").get<std::uint64_t>();
        ev.target_step = j.at("target_step").get<std::size_t>();
        ev.original_value = j.at("original_value").get<double>();
        ev.target_value = j.at("target_value").get<double>();
        ev.action_norm = j.at("action_norm").get<double>();
        ev.predicted_reward = j.at("predicted_reward").get<double>();
        ev.accepted = j.at("accepted").get<bool>();
        log.iterations.back().records.push_back(std::move(ev));
      } else {
        throw ParseError("unknown record type '" + type + "'", lineno);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return log;
}

}  // namespace ts::stitch
