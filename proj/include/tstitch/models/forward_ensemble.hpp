#pragma once

#include <span>
#include <vector>

#include "tstitch/data.hpp"
#include "tstitch/nn/adam.hpp"
#include "tstitch/nn/mlp.hpp"

namespace ts::models {

struct ForwardEnsembleConfig {
  int members = 7;
  int keep = 5;
  std::vector<int> hidden{200, 200, 200};
  double holdout = 0.05;
  int epochs = 50;
  int batch = 256;
  nn::AdamHyper adam{3e-4};
  std::uint64_t seed = 0;
};

/// Action-free next-state model p(s'|s): each member is a diagonal Gaussian whose network works
/// in standardised coordinates, predicting the standardised displacement s' - s.
struct ForwardEnsemble {
  nn::MlpSpec spec;
  std::vector<nn::MlpState> members;      // retained members, best held-out NLL first
  std::vector<double> holdout_nll;        // per retained member, in original coordinates
  std::vector<double> discarded_nll;      // members dropped by selection
  nn::Normalizer state_norm;
  nn::Normalizer delta_norm;

  std::size_t size() const { return members.size(); }
  std::size_t state_dim() const { return static_cast<std::size_t>(spec.input_dim()); }
};

/// Per-member predictive Gaussians at one state, in original coordinates.
struct MemberGaussians {
  std::vector<nn::Vec> mean;
  std::vector<nn::Vec> stddev;
};

/// Trains `members` networks on (s -> s') with distinct seeds and keeps the `keep` best by
/// held-out NLL. Throws TrainingError for datasets under 20 transitions.
ForwardEnsemble train_forward_ensemble(const Dataset& dataset, const ForwardEnsembleConfig& cfg);

MemberGaussians predict_members(const ForwardEnsemble& ensemble, std::span<const double> s);

/// Log density of `x` under each member's Gaussian.
std::vector<double> member_log_density(const MemberGaussians& g, std::span<const double> x);
std::vector<double> member_log_density(const ForwardEnsemble& ensemble, std::span<const double> s,
                                       std::span<const double> s_next);

/// Held-out style score sum_d[(mu-y)^2/sigma^2 + 2 log sigma] averaged over the columns of
/// (states, next_states), for member `m`.
double member_nll(const ForwardEnsemble& ensemble, std::size_t m, const nn::Mat& states,
                  const nn::Mat& next_states);

/// Conservative plausibility rule: min over members of the candidate log density must exceed
/// log(mean over members of the original density). The mean is taken with log-sum-exp.
bool likelihood_gate(std::span<const double> candidate_logp, std::span<const double> original_logp);

bool likelihood_gate(const ForwardEnsemble& ensemble, std::span<const double> s,
                     std::span<const double> original_next, std::span<const double> candidate_next);

/// log(mean(exp(logp))).
double log_mean_exp(std::span<const double> logp);

}  // namespace ts::models
