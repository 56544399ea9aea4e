#pragma once

#include <span>
#include <string_view>

#include "tstitch/nn/mlp.hpp"

namespace ts::nn {

/// The fixed set of training objectives. Every loss is a mean over the batch and every
/// gradient routine *adds* into the caller's buffer.
enum class LossKind {
  mse,
  gaussian_nll,
  cvae_elbo,
  wgan_gen,
  wgan_disc,
  bc_mse,
  weighted_bc_mse,
  bellman_mse,
};

inline constexpr LossKind kAllLosses[] = {
    LossKind::mse,       LossKind::gaussian_nll, LossKind::cvae_elbo,       LossKind::wgan_gen,
    LossKind::wgan_disc, LossKind::bc_mse,       LossKind::weighted_bc_mse, LossKind::bellman_mse};

const char* to_string(LossKind kind);
/// Throws std::invalid_argument for names outside the set.
LossKind loss_kind_from_string(std::string_view name);

// -- closed forms on single samples ----------------------------------------------------------

/// (mu - x)^T Sigma^-1 (mu - x) + log|Sigma| for diagonal Sigma = diag(sigma^2).
/// Throws std::domain_error when any sigma <= 0.
double gaussian_nll(std::span<const double> mu, std::span<const double> sigma,
                    std::span<const double> x);

/// Full diagonal-Gaussian log density, including the -d/2 log(2 pi) constant.
double gaussian_log_density(std::span<const double> mu, std::span<const double> sigma,
                            std::span<const double> x);

/// KL(N(mu, diag sigma^2) || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 1 - ln sigma^2).
double kl_to_standard_normal(std::span<const double> mu, std::span<const double> sigma);

// -- batched losses ---------------------------------------------------------------------------

/// mean_i ||f(x_i) - y_i||^2 (no 1/2 factor).
double mse_loss(const MlpSpec& spec, std::span<const double> params, const Mat& x, const Mat& y,
                std::span<double> grad);

/// mean_i w_i ||f(x_i) - y_i||^2.
double weighted_mse_loss(const MlpSpec& spec, std::span<const double> params, const Mat& x,
                         const Mat& y, std::span<const double> weights, std::span<double> grad);

/// Behavioural cloning: mean_i ||pi(s_i) - a_i||^2.
inline double bc_mse_loss(const MlpSpec& spec, std::span<const double> params, const Mat& states,
                          const Mat& actions, std::span<double> grad) {
  return mse_loss(spec, params, states, actions, grad);
}

inline double weighted_bc_mse_loss(const MlpSpec& spec, std::span<const double> params,
                                   const Mat& states, const Mat& actions,
                                   std::span<const double> weights, std::span<double> grad) {
  return weighted_mse_loss(spec, params, states, actions, weights, grad);
}

/// Gaussian head: mean_i sum_d [(mu - y)^2 / sigma^2 + 2 log sigma].
double gaussian_nll_loss(const MlpSpec& spec, std::span<const double> params, const Mat& x,
                         const Mat& y, std::span<double> grad);

/// r + gamma * (1 - terminal) * next_value, as a 1 x B row.
Mat bellman_targets(std::span<const double> rewards, std::span<const double> next_values,
                    std::span<const std::uint8_t> terminal, double gamma);

/// mean_i (target_i - V(s_i))^2 with targets held fixed (semi-gradient).
double bellman_mse_loss(const MlpSpec& spec, std::span<const double> params, const Mat& states,
                        const Mat& targets, std::span<double> grad);

/// Conditional VAE objective: mean_i ||dec(c_i, z_i) - t_i||^2 + beta * KL(q(z|c_i,t_i) || N(0,I))
/// with z_i = mu_i + sigma_i * eps_i. Encoder input is [c; t], decoder input is [c; z].
double cvae_elbo_loss(const MlpSpec& enc_spec, std::span<const double> enc_params,
                      const MlpSpec& dec_spec, std::span<const double> dec_params,
                      const Mat& cond, const Mat& target, const Mat& eps, double beta,
                      std::span<double> enc_grad, std::span<double> dec_grad);

/// Critic objective mean D(real) - mean D(fake). Inputs are [cond; reward] columns.
double wgan_disc_loss(const MlpSpec& disc_spec, std::span<const double> disc_params,
                      const Mat& real, const Mat& fake, std::span<double> grad);

/// Generator objective mean D([cond; G([z; cond])]), differentiated through the frozen critic.
double wgan_gen_loss(const MlpSpec& gen_spec, std::span<const double> gen_params,
                     const MlpSpec& disc_spec, std::span<const double> disc_params,
                     const Mat& cond, const Mat& z, std::span<double> gen_grad);

}  // namespace ts::nn
