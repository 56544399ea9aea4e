#include "tstitch/policy/policy.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "tstitch/errors.hpp"
#include "tstitch/io_util.hpp"
#include "tstitch/models/common.hpp"
#include "tstitch/nn/checkpoint.hpp"
#include "tstitch/nn/losses.hpp"

namespace ts::policy {

using models::Mat;

namespace {

Policy fit(const Dataset& dataset, std::span<const double> weights, double action_bound,
           const BcConfig& cfg, PolicyKind kind) {
  if (!(action_bound > 0.0)) throw std::invalid_argument("bc: action bound must be positive");
  const auto table = models::flatten(dataset);
  if (table.size() == 0) throw TrainingError("bc: empty dataset");
  if (!weights.empty() && weights.size() != table.size()) {
    throw std::invalid_argument("bc: one weight per transition required");
  }

  Policy p;
  p.kind = kind;
  p.action_bound = action_bound;
  p.spec.layer_sizes = {static_cast<int>(dataset.dims.state)};
  for (int h : cfg.hidden) p.spec.layer_sizes.push_back(h);
  p.spec.layer_sizes.push_back(static_cast<int>(dataset.dims.action));
  p.spec.head = kind == PolicyKind::gaussian ? nn::Head::gaussian : nn::Head::tanh_scaled;
  p.spec.bound = action_bound;
  p.net = nn::init_state(p.spec, derive_seed(cfg.seed, 0x60), cfg.final_scale);

  const auto split = models::split_indices(table.size(), cfg.holdout, derive_seed(cfg.seed, 0x61));
  p.state_norm = nn::Normalizer::fit(nn::gather_columns(table.states, split.train));
  const Mat x = p.state_norm.apply(table.states);
  const Mat& y = table.actions;

  auto batch_loss = [&](std::span<const std::size_t> idx, std::span<double> grad) {
    const Mat xb = nn::gather_columns(x, idx);
    const Mat yb = nn::gather_columns(y, idx);
    if (kind == PolicyKind::gaussian) return nn::gaussian_nll_loss(p.spec, p.net.params, xb, yb, grad);
    if (weights.empty()) return nn::bc_mse_loss(p.spec, p.net.params, xb, yb, grad);
    std::vector<double> w(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) w[j] = weights[idx[j]];
    return nn::weighted_bc_mse_loss(p.spec, p.net.params, xb, yb, w, grad);
  };

  models::MinibatchPlan plan(split.train.size(), static_cast<std::size_t>(cfg.batch),
                             derive_seed(cfg.seed, 0x62));
  const auto per_epoch = plan.batches_per_epoch();
  std::vector<double> grad(p.net.params.size());
  std::vector<std::size_t> idx;
  std::optional<double> best;
  nn::MlpState best_net;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const auto local = plan.next();
      idx.resize(local.size());
      for (std::size_t j = 0; j < local.size(); ++j) idx[j] = split.train[local[j]];
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = batch_loss(idx, grad);
      models::check_finite_loss(loss, "bc");
      nn::adam_update(p.net, grad, cfg.adam);
      total += loss;
    }
    p.loss_history.push_back(total / static_cast<double>(per_epoch));
    if (!split.holdout.empty()) {
      const double h = batch_loss(split.holdout, {});
      p.holdout_history.push_back(h);
      if (!best || h < *best) {
        best = h;
        best_net = p.net;
        p.best_epoch = epoch;
      }
    }
  }
  if (best) p.net = std::move(best_net);
  return p;
}

}  // namespace

Policy train_bc(const Dataset& dataset, double action_bound, const BcConfig& cfg) {
  return fit(dataset, {}, action_bound, cfg, PolicyKind::deterministic);
}

Policy train_bc_weighted(const Dataset& dataset, std::span<const double> weights,
                         double action_bound, const BcConfig& cfg) {
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("bc: weights must be finite and nonnegative");
  }
  return fit(dataset, weights, action_bound, cfg, PolicyKind::deterministic);
}

std::vector<double> value_weights(const Dataset& dataset, const models::StateValueFn& value_fn,
                                  double delta) {
  const auto table = models::flatten(dataset);
  auto w = value_fn.values(table.states);
  if (w.empty()) return w;
  const double lo = *std::min_element(w.begin(), w.end());
  for (double& v : w) v -= lo;
  // Shift first so a constant value gives exactly delta / delta = 1.
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size()) + delta;
  for (double& v : w) v = (v + delta) / mean;
  return w;
}

Policy train_weighted_bc(const Dataset& dataset, const models::StateValueFn& value_fn,
                         double action_bound, const BcConfig& cfg) {
  const auto w = value_weights(dataset, value_fn);
  return train_bc_weighted(dataset, w, action_bound, cfg);
}

Policy train_gaussian_bc(const Dataset& dataset, double action_bound, const BcConfig& cfg) {
  return fit(dataset, {}, action_bound, cfg, PolicyKind::gaussian);
}

namespace {

nn::HeadOutput head(const Policy& policy, std::span<const double> s) {
  if (static_cast<int>(s.size()) != policy.state_dim()) throw ShapeError("policy: state width");
  return nn::forward(policy.spec, policy.net, policy.state_norm.apply(models::column(s)));
}

}  // namespace

std::vector<double> act(const Policy& policy, std::span<const double> s, ActMode mode,
                        std::mt19937_64* rng) {
  const auto out = head(policy, s);
  std::vector<double> a(out.value.data(), out.value.data() + out.value.size());
  if (policy.kind == PolicyKind::gaussian && mode == ActMode::sample) {
    if (!rng) throw std::invalid_argument("act: sampling needs an RNG");
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] += std::exp(out.log_std(static_cast<Eigen::Index>(i), 0)) * normal(*rng);
    }
  }
  return a;
}

nn::Mat act_batch(const Policy& policy, const nn::Mat& states) {
  return nn::forward(policy.spec, policy.net, policy.state_norm.apply(states)).value;
}

ActionGaussian action_distribution(const Policy& policy, std::span<const double> s) {
  if (policy.kind != PolicyKind::gaussian) throw std::invalid_argument("policy is not gaussian");
  const auto out = head(policy, s);
  ActionGaussian g;
  g.mean.assign(out.value.data(), out.value.data() + out.value.size());
  for (Eigen::Index i = 0; i < out.log_std.size(); ++i) g.stddev.push_back(std::exp(out.log_std(i, 0)));
  return g;
}

double log_prob(const Policy& policy, std::span<const double> s, std::span<const double> a) {
  const auto g = action_distribution(policy, s);
  return nn::gaussian_log_density(g.mean, g.stddev, a);
}

void write_policy(std::ostream& out, const Policy& policy) {
  BinaryWriter w(out);
  w.bytes("TSPL", 4);
  w.u8(policy.kind == PolicyKind::gaussian ? 1 : 0);
  w.f64(policy.action_bound);
  nn::write_normalizer(out, policy.state_norm);
  nn::write_checkpoint(out, policy.spec, policy.net);
}

Policy read_policy(std::istream& in) {
  BinaryReader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string_view(magic, 4) != "TSPL") throw ParseError("not a policy stream");
  Policy p;
  p.kind = r.u8() ? PolicyKind::gaussian : PolicyKind::deterministic;
  p.action_bound = r.f64();
  p.state_norm = nn::read_normalizer(in);
  nn::read_checkpoint(in, p.spec, p.net);
  return p;
}

void save_policy(const std::filesystem::path& path, const Policy& policy) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_policy(out, policy);
}

Policy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact(path.string());
  return read_policy(in);
}

}  // namespace ts::policy
