#include "tstitch/models/forward_ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tstitch/errors.hpp"
#include "tstitch/io_util.hpp"
#include "tstitch/models/common.hpp"
#include "tstitch/nn/losses.hpp"
#include "tstitch/parallel.hpp"

namespace ts::models {

namespace {

struct MemberFit {
  nn::MlpState state;
  double holdout_nll = 0.0;
};

}  // namespace

ForwardEnsemble train_forward_ensemble(const Dataset& dataset, const ForwardEnsembleConfig& cfg) {
  const auto table = flatten(dataset);
  if (table.size() < 20) {
    throw TrainingError("forward ensemble: need at least 20 transitions, have " +
                        std::to_string(table.size()));
  }
  if (cfg.keep < 1 || cfg.keep > cfg.members) {
    throw std::invalid_argument("forward ensemble: need 1 <= keep <= members");
  }
  const auto split = split_indices(table.size(), cfg.holdout, derive_seed(cfg.seed, 0xf0));
  const Mat s_train = nn::gather_columns(table.states, split.train);
  const Mat sn_train = nn::gather_columns(table.next_states, split.train);
  const Mat s_hold = nn::gather_columns(table.states, split.holdout);
  const Mat sn_hold = nn::gather_columns(table.next_states, split.holdout);

  ForwardEnsemble ens;
  const int dS = static_cast<int>(dataset.dims.state);
  ens.spec.layer_sizes.push_back(dS);
  for (int h : cfg.hidden) ens.spec.layer_sizes.push_back(h);
  ens.spec.layer_sizes.push_back(dS);
  ens.spec.hidden = nn::Activation::relu;
  ens.spec.head = nn::Head::gaussian;
  ens.state_norm = nn::Normalizer::fit(s_train);
  ens.delta_norm = nn::Normalizer::fit(sn_train - s_train);

  const Mat x = ens.state_norm.apply(s_train);
  const Mat y = ens.delta_norm.apply(sn_train - s_train);

  std::vector<MemberFit> fits(static_cast<std::size_t>(cfg.members));
  parallel_for(fits.size(), [&](std::size_t m) {
    auto st = nn::init_state(ens.spec, derive_seed(cfg.seed, 0xe1, m));
    MinibatchPlan plan(split.train.size(), static_cast<std::size_t>(cfg.batch),
                       derive_seed(cfg.seed, 0xe2, m));
    std::vector<double> grad(st.params.size());
    const auto steps = static_cast<std::size_t>(cfg.epochs) * plan.batches_per_epoch();
    for (std::size_t it = 0; it < steps; ++it) {
      const auto idx = plan.next();
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = nn::gaussian_nll_loss(ens.spec, st.params, nn::gather_columns(x, idx),
                                                nn::gather_columns(y, idx), grad);
      check_finite_loss(loss, "forward ensemble");
      nn::adam_update(st, grad, cfg.adam);
    }
    fits[m].state = std::move(st);
  });

  // Score every member on the held-out split in original coordinates.
  ForwardEnsemble scoring = ens;
  for (auto& f : fits) scoring.members.push_back(f.state);
  const bool have_holdout = !split.holdout.empty();
  for (std::size_t m = 0; m < fits.size(); ++m) {
    fits[m].holdout_nll = have_holdout ? member_nll(scoring, m, s_hold, sn_hold)
                                       : member_nll(scoring, m, s_train, sn_train);
  }

  std::vector<std::size_t> order(fits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return fits[a].holdout_nll < fits[b].holdout_nll;
  });
  for (std::size_t r = 0; r < order.size(); ++r) {
    auto& f = fits[order[r]];
    if (r < static_cast<std::size_t>(cfg.keep)) {
      ens.members.push_back(std::move(f.state));
      ens.holdout_nll.push_back(f.holdout_nll);
    } else {
      ens.discarded_nll.push_back(f.holdout_nll);
    }
  }
  return ens;
}

namespace {

void member_gaussian(const ForwardEnsemble& e, std::size_t m, const Mat& states, Mat& mean,
                     Mat& stddev) {
  const auto out = nn::forward(e.spec, e.members[m], e.state_norm.apply(states));
  mean = states + e.delta_norm.invert(out.value);
  stddev = (out.log_std.array().exp().colwise() * e.delta_norm.scale.array()).matrix();
}

}  // namespace

MemberGaussians predict_members(const ForwardEnsemble& ensemble, std::span<const double> s) {
  if (s.size() != ensemble.state_dim()) throw ShapeError("predict_members: state width");
  const Mat x = column(s);
  MemberGaussians g;
  for (std::size_t m = 0; m < ensemble.size(); ++m) {
    Mat mean, sd;
    member_gaussian(ensemble, m, x, mean, sd);
    g.mean.emplace_back(mean.col(0));
    g.stddev.emplace_back(sd.col(0));
  }
  return g;
}

std::vector<double> member_log_density(const MemberGaussians& g, std::span<const double> x) {
  std::vector<double> out;
  out.reserve(g.mean.size());
  for (std::size_t m = 0; m < g.mean.size(); ++m) {
    if (static_cast<std::size_t>(g.mean[m].size()) != x.size()) {
      throw ShapeError("member_log_density: width mismatch");
    }
    out.push_back(nn::gaussian_log_density(
        std::span<const double>(g.mean[m].data(), x.size()),
        std::span<const double>(g.stddev[m].data(), x.size()), x));
  }
  return out;
}

std::vector<double> member_log_density(const ForwardEnsemble& ensemble, std::span<const double> s,
                                       std::span<const double> s_next) {
  return member_log_density(predict_members(ensemble, s), s_next);
}

double member_nll(const ForwardEnsemble& ensemble, std::size_t m, const Mat& states,
                  const Mat& next_states) {
  Mat mean, sd;
  member_gaussian(ensemble, m, states, mean, sd);
  const double quad = ((mean - next_states).array() / sd.array()).square().sum();
  const double logdet = 2.0 * sd.array().log().sum();
  return (quad + logdet) / static_cast<double>(states.cols());
}

double log_mean_exp(std::span<const double> logp) {
  if (logp.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(logp.begin(), logp.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double v : logp) acc += std::exp(v - mx);
  return mx + std::log(acc) - std::log(static_cast<double>(logp.size()));
}

bool likelihood_gate(std::span<const double> candidate_logp, std::span<const double> original_logp) {
  if (candidate_logp.empty() || original_logp.empty()) return false;
  const double min_cand = *std::min_element(candidate_logp.begin(), candidate_logp.end());
  return min_cand > log_mean_exp(original_logp);
}

bool likelihood_gate(const ForwardEnsemble& ensemble, std::span<const double> s,
                     std::span<const double> original_next, std::span<const double> candidate_next) {
  const auto g = predict_members(ensemble, s);
  return likelihood_gate(member_log_density(g, candidate_next), member_log_density(g, original_next));
}

}  // namespace ts::models
