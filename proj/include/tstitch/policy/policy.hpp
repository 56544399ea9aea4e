#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "tstitch/data.hpp"
#include "tstitch/models/value_function.hpp"
#include "tstitch/nn/adam.hpp"
#include "tstitch/nn/mlp.hpp"

namespace ts::policy {

enum class PolicyKind { deterministic, gaussian };

struct Policy {
  PolicyKind kind = PolicyKind::deterministic;
  nn::MlpSpec spec;
  nn::MlpState net;
  nn::Normalizer state_norm;
  double action_bound = 1.0;
  std::vector<double> loss_history;     // mean training loss per epoch
  std::vector<double> holdout_history;  // per epoch, when a holdout split is used
  std::optional<int> best_epoch;        // epoch whose parameters were kept (holdout runs)

  int state_dim() const { return spec.input_dim(); }
  int action_dim() const { return spec.output_dim(); }
};

struct BcConfig {
  std::vector<int> hidden{256, 256};
  int epochs = 50;
  int batch = 256;
  nn::AdamHyper adam{1e-3};
  double holdout = 0.0;  // > 0 keeps the parameters with the lowest held-out loss
  double final_scale = 0.01;
  std::uint64_t seed = 0;
};

/// Deterministic BC minimising mean ||pi(s) - a||^2. The head is bound * tanh.
Policy train_bc(const Dataset& dataset, double action_bound, const BcConfig& cfg);

/// As train_bc with one nonnegative weight per transition (dataset order).
Policy train_bc_weighted(const Dataset& dataset, std::span<const double> weights,
                         double action_bound, const BcConfig& cfg);

/// Per-transition weights from a value function: V(s) - min V + delta, rescaled to mean 1.
std::vector<double> value_weights(const Dataset& dataset, const models::StateValueFn& value_fn,
                                  double delta = 1e-3);

/// Value-weighted BC using value_weights.
Policy train_weighted_bc(const Dataset& dataset, const models::StateValueFn& value_fn,
                         double action_bound, const BcConfig& cfg);

/// Gaussian-head BC by maximum likelihood. The mean is not squashed.
Policy train_gaussian_bc(const Dataset& dataset, double action_bound, const BcConfig& cfg);

enum class ActMode { mean, sample };

/// Deterministic policies ignore `mode`. Sampling needs `rng`.
std::vector<double> act(const Policy& policy, std::span<const double> s, ActMode mode = ActMode::mean,
                        std::mt19937_64* rng = nullptr);

/// Batched mean actions, one column per state.
nn::Mat act_batch(const Policy& policy, const nn::Mat& states);

/// Mean and standard deviation of a gaussian policy at `s`.
struct ActionGaussian {
  std::vector<double> mean;
  std::vector<double> stddev;
};
ActionGaussian action_distribution(const Policy& policy, std::span<const double> s);

/// log pi(a|s) including the normalising constant. Gaussian policies only.
double log_prob(const Policy& policy, std::span<const double> s, std::span<const double> a);

void write_policy(std::ostream& out, const Policy& policy);
Policy read_policy(std::istream& in);
void save_policy(const std::filesystem::path& path, const Policy& policy);
Policy load_policy(const std::filesystem::path& path);

}  // namespace ts::policy
