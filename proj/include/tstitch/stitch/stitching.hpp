#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tstitch/data.hpp"
#include "tstitch/models/common.hpp"
#include "tstitch/models/forward_ensemble.hpp"
#include "tstitch/models/inverse_model.hpp"
#include "tstitch/models/reward_model.hpp"
#include "tstitch/models/value_function.hpp"
#include "tstitch/state_index.hpp"

namespace ts::stitch {

struct StitchConfig {
  double epsilon = 0.1;
  double p_tilde = 0.1;
  int iterations = 5;
  std::size_t max_len = 0;  // 0: twice the longest input trajectory
  std::optional<int> max_changes;
  models::ZMode z_mode = models::ZMode::prior_mean;
  std::size_t candidate_cap = 512;
  std::uint64_t seed = 0;
};

/// The dynamics-side queries stitching makes. Learned models implement it for real runs;
/// tests substitute exact tables.
class TransitionModels {
 public:
  virtual ~TransitionModels() = default;
  /// Gate verdict for each candidate next state of `s`, relative to the recorded `original_next`.
  virtual std::vector<bool> plausible(std::span<const double> s, std::span<const double> original_next,
                                      const std::vector<std::span<const double>>& candidates) const = 0;
  virtual std::vector<double> action(std::span<const double> s, std::span<const double> s_next,
                                     std::mt19937_64& rng) const = 0;
  virtual double reward(std::span<const double> s, std::span<const double> a,
                        std::span<const double> s_next, std::mt19937_64& rng) const = 0;
};

/// Forward ensemble gate, CVAE actions and a reward model, all frozen.
class LearnedModels final : public TransitionModels {
 public:
  LearnedModels(const models::ForwardEnsemble& forward, const models::InverseModel& inverse,
                const models::RewardModel& reward, models::ZMode z_mode)
      : forward_(forward), inverse_(inverse), reward_(reward), z_mode_(z_mode) {}

  std::vector<bool> plausible(std::span<const double> s, std::span<const double> original_next,
                              const std::vector<std::span<const double>>& candidates) const override;
  std::vector<double> action(std::span<const double> s, std::span<const double> s_next,
                             std::mt19937_64& rng) const override;
  double reward(std::span<const double> s, std::span<const double> a, std::span<const double> s_next,
                std::mt19937_64& rng) const override;

 private:
  const models::ForwardEnsemble& forward_;
  const models::InverseModel& inverse_;
  const models::RewardModel& reward_;
  models::ZMode z_mode_;
};

/// Index entry positions that may replace the next state of transition (trajectory, step):
/// successors of states within epsilon of its state, plus states within epsilon of its next
/// state. The original next-state occurrence is excluded. Ascending (trajectory id, step).
std::vector<std::size_t> candidate_next_states(const StateIndex& index, const Dataset& dataset,
                                               std::uint64_t trajectory, std::size_t step,
                                               double epsilon);

struct CandidateScore {
  std::uint64_t trajectory = 0;
  std::size_t step = 0;
  double value = 0.0;
  bool gate_passed = false;
};

/// Position in `candidates` of the gate-passing candidate with the highest value, if that
/// value beats `original_value`. Ties go to the smallest (trajectory, step).
std::optional<std::size_t> select_stitch_target(std::span<const CandidateScore> candidates,
                                                double original_value);

struct StitchEvent {
  std::uint64_t trajectory = 0;   // trajectory being rebuilt
  std::size_t step = 0;           // position in the rebuilt trajectory
  StateVec source_state;
  std::uint64_t target_trajectory = 0;
  std::size_t target_step = 0;
  double original_value = 0.0;
  double target_value = 0.0;
  double action_norm = 0.0;
  double predicted_reward = 0.0;
  bool accepted = false;  // the rebuilt trajectory replaced the original
};

struct StitchResult {
  Trajectory trajectory;
  std::vector<StitchEvent> events;
  bool truncated = false;
};

/// Frozen per-iteration inputs to the walk.
struct StitchContext {
  const Dataset& dataset;
  const StateIndex& index;
  std::span<const double> entry_values;  // value of every index entry
  const models::StateValueFn& value_fn;
  const TransitionModels& models;
  const StitchConfig& cfg;
  /// Trajectory id -> position in dataset.trajectories; looked up linearly when null.
  const std::unordered_map<std::uint64_t, std::size_t>* positions = nullptr;
};

/// Value of each index entry, computed in one batch.
std::vector<double> index_values(const StateIndex& index, const models::StateValueFn& value_fn);

/// Rebuilds one trajectory by walking from its first state, taking stitches where allowed.
StitchResult stitch_trajectory(const Trajectory& traj, const StitchContext& ctx, std::mt19937_64& rng);

/// (1 + p_tilde) * old return < new return.
bool replace_decision(const Trajectory& old_traj, const Trajectory& new_traj, double p_tilde);

struct IterationLog {
  int iteration = 0;
  std::size_t trajectories = 0;
  std::size_t replaced = 0;
  std::size_t events = 0;           // stitch events across all rebuilt trajectories
  std::size_t accepted_events = 0;  // events in replaced trajectories
  std::size_t truncated = 0;
  std::size_t negative_margin = 0;  // replacements judged against a negative old return
  double mean_return_before = 0.0;
  double mean_return_after = 0.0;
  double value_loss = 0.0;          // final-epoch value loss (NaN when no value was trained here)
  std::vector<StitchEvent> records;
};

struct StitchLog {
  std::vector<IterationLog> iterations;
};

/// One stitch-and-replace pass with a fixed value function.
Dataset stitch_pass(const Dataset& dataset, const models::StateValueFn& value_fn,
                    const TransitionModels& models, const StitchConfig& cfg, int iteration,
                    IterationLog& log);

/// Retrains the value function from scratch on `dataset`, then runs stitch_pass.
Dataset ts_iteration(const Dataset& dataset, const TransitionModels& models,
                     const models::ValueConfig& value_cfg, const StitchConfig& cfg, int iteration,
                     IterationLog& log);

struct ModelConfigs {
  double action_bound = 1.0;
  models::ForwardEnsembleConfig forward;
  models::CvaeConfig inverse;
  models::RewardConfig reward;
  models::ValueConfig value;
};

struct TrainedModels {
  models::ForwardEnsemble forward;
  models::InverseModel inverse;
  models::RewardModel reward;
};

/// Binary form of the three environment models: "TSEM", u32 version, then each model's
/// normalizers and checkpoints in a fixed order.
void write_models(std::ostream& out, const TrainedModels& models);
TrainedModels read_models(std::istream& in);

/// Fits the three environment models once; seeds are derived from `seed`.
TrainedModels train_models(const Dataset& dataset, const ModelConfigs& cfgs, std::uint64_t seed);

/// cfg.iterations rounds of ts_iteration with frozen environment models. `per_iteration`, when
/// given, receives the dataset after every iteration.
Dataset run_ts_with(const Dataset& dataset, const TransitionModels& models,
                    const models::ValueConfig& value_cfg, const StitchConfig& cfg, StitchLog& log,
                    std::vector<Dataset>* per_iteration = nullptr);

/// Trains the environment models on `dataset`, then runs cfg.iterations TS iterations.
Dataset run_ts(const Dataset& dataset, const StitchConfig& cfg, const ModelConfigs& cfgs,
               StitchLog& log);

/// One JSON object per line: an "iteration" record followed by its "event" records.
void write_log_jsonl(std::ostream& out, const StitchLog& log);
StitchLog read_log_jsonl(std::istream& in);

}  // namespace ts::stitch
