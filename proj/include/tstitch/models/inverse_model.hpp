#pragma once

#include <random>
#include <span>
#include <vector>

#include "tstitch/data.hpp"
#include "tstitch/models/common.hpp"
#include "tstitch/nn/adam.hpp"
#include "tstitch/nn/mlp.hpp"

namespace ts::models {

struct CvaeConfig {
  std::vector<int> hidden{256, 256};
  double beta = 0.5;  // weight on the KL term
  int epochs = 50;
  int batch = 100;
  nn::AdamHyper adam{1e-4};
  std::uint64_t seed = 0;
};

/// Conditional VAE over actions given (s, s'). The latent width is twice the action width;
/// the decoder ends in a bound * tanh head so generated actions are always admissible.
struct InverseModel {
  nn::MlpSpec encoder_spec;  // [s; s'; a] -> (mu_z, log sigma_z)
  nn::MlpSpec decoder_spec;  // [s; s'; z] -> a
  nn::MlpState encoder;
  nn::MlpState decoder;
  nn::Normalizer state_norm;
  std::vector<double> loss_history;  // mean ELBO loss per epoch

  int latent_dim() const { return encoder_spec.output_dim(); }
  double action_bound() const { return decoder_spec.bound; }
};

InverseModel train_inverse_cvae(const Dataset& dataset, double action_bound, const CvaeConfig& cfg);

/// Decoder output for (s, s'). prior_mean decodes at z = 0 and is deterministic.
std::vector<double> generate_action(const InverseModel& model, std::span<const double> s,
                                    std::span<const double> s_next, ZMode mode = ZMode::prior_mean,
                                    std::mt19937_64* rng = nullptr);

/// Batched prior-mean decode; columns of `states`/`next_states` are paired.
Mat generate_actions(const InverseModel& model, const Mat& states, const Mat& next_states);

}  // namespace ts::models
