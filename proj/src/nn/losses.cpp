#include "tstitch/nn/losses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tstitch/errors.hpp"

namespace ts::nn {

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::mse: return "mse";
    case LossKind::gaussian_nll: return "gaussian_nll";
    case LossKind::cvae_elbo: return "cvae_elbo";
    case LossKind::wgan_gen: return "wgan_gen";
    case LossKind::wgan_disc: return "wgan_disc";
    case LossKind::bc_mse: return "bc_mse";
    case LossKind::weighted_bc_mse: return "weighted_bc_mse";
    case LossKind::bellman_mse: return "bellman_mse";
  }
  return "?";
}

LossKind loss_kind_from_string(std::string_view name) {
  for (auto k : kAllLosses) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

double gaussian_nll(std::span<const double> mu, std::span<const double> sigma,
                    std::span<const double> x) {
  if (mu.size() != sigma.size() || mu.size() != x.size()) {
    throw ShapeError("gaussian_nll: width mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw std::domain_error("gaussian_nll: nonpositive variance");
    const double d = (mu[i] - x[i]) / sigma[i];
    total += d * d + 2.0 * std::log(sigma[i]);
  }
  return total;
}

double gaussian_log_density(std::span<const double> mu, std::span<const double> sigma,
                            std::span<const double> x) {
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  return -0.5 * (gaussian_nll(mu, sigma, x) + static_cast<double>(mu.size()) * log_2pi);
}

double kl_to_standard_normal(std::span<const double> mu, std::span<const double> sigma) {
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double var = sigma[i] * sigma[i];
    kl += mu[i] * mu[i] + var - 1.0 - std::log(var);
  }
  return 0.5 * kl;
}

namespace {

void check_batch(const Mat& x, const Mat& y, const char* what) {
  if (x.cols() != y.cols()) throw ShapeError(std::string(what) + ": batch size mismatch");
  if (x.cols() == 0) throw ShapeError(std::string(what) + ": empty batch");
}

}  // namespace

double mse_loss(const MlpSpec& spec, std::span<const double> params, const Mat& x, const Mat& y,
                std::span<double> grad) {
  check_batch(x, y, "mse_loss");
  const double n = static_cast<double>(x.cols());
  ForwardCache cache;
  const auto out = forward(spec, params, x, grad.empty() ? nullptr : &cache);
  const Mat diff = out.value - y;
  if (!grad.empty()) backward(spec, params, cache, (2.0 / n) * diff, nullptr, grad);
  return diff.squaredNorm() / n;
}

double weighted_mse_loss(const MlpSpec& spec, std::span<const double> params, const Mat& x,
                         const Mat& y, std::span<const double> weights, std::span<double> grad) {
  check_batch(x, y, "weighted_mse_loss");
  if (weights.size() != static_cast<std::size_t>(x.cols())) {
    throw ShapeError("weighted_mse_loss: one weight per sample required");
  }
  const double n = static_cast<double>(x.cols());
  ForwardCache cache;
  const auto out = forward(spec, params, x, grad.empty() ? nullptr : &cache);
  Mat diff = out.value - y;
  const Eigen::Map<const Eigen::RowVectorXd> w(weights.data(), x.cols());
  const double loss = (diff.colwise().squaredNorm().array() * w.array()).sum() / n;
  if (!grad.empty()) {
    diff.array().rowwise() *= w.array();
    backward(spec, params, cache, (2.0 / n) * diff, nullptr, grad);
  }
  return loss;
}

double gaussian_nll_loss(const MlpSpec& spec, std::span<const double> params, const Mat& x,
                         const Mat& y, std::span<double> grad) {
  check_batch(x, y, "gaussian_nll_loss");
  if (spec.head != Head::gaussian) throw std::invalid_argument("gaussian_nll_loss: needs gaussian head");
  const double n = static_cast<double>(x.cols());
  ForwardCache cache;
  const auto out = forward(spec, params, x, grad.empty() ? nullptr : &cache);
  const Mat diff = out.value - y;
  const Mat inv_var = (-2.0 * out.log_std).array().exp().matrix();
  const Mat sq = diff.array().square() * inv_var.array();
  const double loss = (sq.sum() + 2.0 * out.log_std.sum()) / n;
  if (!grad.empty()) {
    const Mat d_mean = (2.0 / n) * (diff.array() * inv_var.array()).matrix();
    const Mat d_log_std = ((2.0 - 2.0 * sq.array()) / n).matrix();
    backward(spec, params, cache, d_mean, &d_log_std, grad);
  }
  return loss;
}

Mat bellman_targets(std::span<const double> rewards, std::span<const double> next_values,
                    std::span<const std::uint8_t> terminal, double gamma) {
  if (rewards.size() != next_values.size() || rewards.size() != terminal.size()) {
    throw ShapeError("bellman_targets: length mismatch");
  }
  Mat t(1, static_cast<Eigen::Index>(rewards.size()));
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    t(0, static_cast<Eigen::Index>(i)) = rewards[i] + (terminal[i] ? 0.0 : gamma * next_values[i]);
  }
  return t;
}

double bellman_mse_loss(const MlpSpec& spec, std::span<const double> params, const Mat& states,
                        const Mat& targets, std::span<double> grad) {
  if (spec.output_dim() != 1) throw ShapeError("bellman_mse_loss: value net must be scalar");
  return mse_loss(spec, params, states, targets, grad);
}

double cvae_elbo_loss(const MlpSpec& enc_spec, std::span<const double> enc_params,
                      const MlpSpec& dec_spec, std::span<const double> dec_params,
                      const Mat& cond, const Mat& target, const Mat& eps, double beta,
                      std::span<double> enc_grad, std::span<double> dec_grad) {
  check_batch(cond, target, "cvae_elbo_loss");
  if (enc_spec.head != Head::gaussian) throw std::invalid_argument("cvae: encoder needs gaussian head");
  const double n = static_cast<double>(cond.cols());
  const auto latent = enc_spec.output_dim();
  if (eps.rows() != latent || eps.cols() != cond.cols()) throw ShapeError("cvae: eps shape");

  Mat enc_in(cond.rows() + target.rows(), cond.cols());
  enc_in << cond, target;
  ForwardCache enc_cache;
  const bool want_grad = !enc_grad.empty() || !dec_grad.empty();
  const auto q = forward(enc_spec, enc_params, enc_in, want_grad ? &enc_cache : nullptr);
  const Mat sigma = q.log_std.array().exp().matrix();
  const Mat z = q.value + (sigma.array() * eps.array()).matrix();

  Mat dec_in(cond.rows() + latent, cond.cols());
  dec_in << cond, z;
  ForwardCache dec_cache;
  const auto recon = forward(dec_spec, dec_params, dec_in, want_grad ? &dec_cache : nullptr);
  const Mat diff = recon.value - target;
  const double kl = 0.5 * (q.value.array().square() + sigma.array().square() - 1.0 -
                           2.0 * q.log_std.array())
                              .sum();
  const double loss = (diff.squaredNorm() + beta * kl) / n;

  if (want_grad) {
    std::vector<double> scratch;
    std::span<double> dg = dec_grad;
    if (dg.empty()) {
      scratch.assign(dec_spec.param_count(), 0.0);
      dg = scratch;
    }
    const Mat d_in = backward(dec_spec, dec_params, dec_cache, (2.0 / n) * diff, nullptr, dg);
    const Mat dz = d_in.bottomRows(latent);
    if (!enc_grad.empty()) {
      const Mat d_mu = dz + (beta / n) * q.value;
      const Mat d_log_std = (dz.array() * eps.array() * sigma.array() +
                             (beta / n) * (sigma.array().square() - 1.0))
                                .matrix();
      backward(enc_spec, enc_params, enc_cache, d_mu, &d_log_std, enc_grad);
    }
  }
  return loss;
}

double wgan_disc_loss(const MlpSpec& disc_spec, std::span<const double> disc_params,
                      const Mat& real, const Mat& fake, std::span<double> grad) {
  if (disc_spec.output_dim() != 1) throw ShapeError("wgan: critic must be scalar");
  const double nr = static_cast<double>(real.cols());
  const double nf = static_cast<double>(fake.cols());
  ForwardCache rc, fc;
  const auto dr = forward(disc_spec, disc_params, real, grad.empty() ? nullptr : &rc);
  const auto df = forward(disc_spec, disc_params, fake, grad.empty() ? nullptr : &fc);
  if (!grad.empty()) {
    backward(disc_spec, disc_params, rc, Mat::Constant(1, real.cols(), 1.0 / nr), nullptr, grad);
    backward(disc_spec, disc_params, fc, Mat::Constant(1, fake.cols(), -1.0 / nf), nullptr, grad);
  }
  return dr.value.mean() - df.value.mean();
}

double wgan_gen_loss(const MlpSpec& gen_spec, std::span<const double> gen_params,
                     const MlpSpec& disc_spec, std::span<const double> disc_params,
                     const Mat& cond, const Mat& z, std::span<double> gen_grad) {
  if (z.cols() != cond.cols()) throw ShapeError("wgan_gen_loss: batch mismatch");
  const double n = static_cast<double>(cond.cols());
  Mat gen_in(z.rows() + cond.rows(), cond.cols());
  gen_in << z, cond;
  ForwardCache gc;
  const bool want = !gen_grad.empty();
  const auto r = forward(gen_spec, gen_params, gen_in, want ? &gc : nullptr);
  Mat fake(cond.rows() + r.value.rows(), cond.cols());
  fake << cond, r.value;
  ForwardCache dc;
  const auto d = forward(disc_spec, disc_params, fake, want ? &dc : nullptr);
  if (want) {
    std::vector<double> disc_scratch(disc_spec.param_count(), 0.0);
    const Mat d_in = backward(disc_spec, disc_params, dc, Mat::Constant(1, cond.cols(), 1.0 / n),
                              nullptr, disc_scratch);
    backward(gen_spec, gen_params, gc, d_in.bottomRows(r.value.rows()), nullptr, gen_grad);
  }
  return d.value.mean();
}

}  // namespace ts::nn
