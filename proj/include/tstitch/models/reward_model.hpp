#pragma once

#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "tstitch/data.hpp"
#include "tstitch/models/common.hpp"
#include "tstitch/nn/adam.hpp"
#include "tstitch/nn/mlp.hpp"

namespace ts::models {

enum class RewardKind { wgan, mlp, gaussian, vae };

const char* to_string(RewardKind kind);
/// Throws std::invalid_argument for unknown names.
RewardKind reward_kind_from_string(std::string_view name);

struct RewardConfig {
  RewardKind kind = RewardKind::wgan;
  std::vector<int> hidden{512, 512};
  int epochs = 50;
  int batch = 256;
  nn::AdamHyper adam{1e-4, 0.5, 0.999, 1e-8, 1e-4};
  int z_dim = 2;        // wgan noise width, vae latent width
  int n_critic = 5;     // critic updates per generator update
  double clip = 0.01;   // critic weight clip
  double beta = 0.5;    // vae KL weight
  std::uint64_t seed = 0;
};

/// r(s, a, s') predictor. `main` is the generator (wgan), decoder (vae) or the single network
/// (mlp, gaussian); `aux` is the critic (wgan) or encoder (vae).
struct RewardModel {
  RewardKind kind = RewardKind::mlp;
  nn::MlpSpec main_spec;
  nn::MlpState main;
  nn::MlpSpec aux_spec;
  nn::MlpState aux;
  int z_dim = 0;
  nn::Normalizer input_norm;   // over [s; a; s']
  nn::Normalizer reward_norm;  // width 1
  std::vector<double> loss_history;
};

RewardModel train_reward_model(const Dataset& dataset, const RewardConfig& cfg);

double predict_reward(const RewardModel& model, std::span<const double> s, std::span<const double> a,
                      std::span<const double> s_next, ZMode mode = ZMode::prior_mean,
                      std::mt19937_64* rng = nullptr);

/// Batched prior-mean predictions for paired columns.
std::vector<double> predict_rewards(const RewardModel& model, const Mat& states, const Mat& actions,
                                    const Mat& next_states);

}  // namespace ts::models
