#include "tstitch/models/inverse_model.hpp"

#include <algorithm>

#include "tstitch/errors.hpp"
#include "tstitch/io_util.hpp"
#include "tstitch/nn/losses.hpp"

namespace ts::models {

InverseModel train_inverse_cvae(const Dataset& dataset, double action_bound, const CvaeConfig& cfg) {
  const auto table = flatten(dataset);
  if (table.size() == 0) throw TrainingError("inverse model: empty dataset");
  const int dS = static_cast<int>(dataset.dims.state);
  const int dA = static_cast<int>(dataset.dims.action);
  const int latent = 2 * dA;

  InverseModel model;
  model.state_norm = nn::Normalizer::fit(table.states);
  model.encoder_spec.layer_sizes = {2 * dS + dA};
  model.decoder_spec.layer_sizes = {2 * dS + latent};
  for (int h : cfg.hidden) {
    model.encoder_spec.layer_sizes.push_back(h);
    model.decoder_spec.layer_sizes.push_back(h);
  }
  model.encoder_spec.layer_sizes.push_back(latent);
  model.encoder_spec.head = nn::Head::gaussian;
  model.decoder_spec.layer_sizes.push_back(dA);
  model.decoder_spec.head = nn::Head::tanh_scaled;
  model.decoder_spec.bound = action_bound;
  model.encoder = nn::init_state(model.encoder_spec, derive_seed(cfg.seed, 0x1e));
  model.decoder = nn::init_state(model.decoder_spec, derive_seed(cfg.seed, 0x1d));

  const Mat s = model.state_norm.apply(table.states);
  const Mat sn = model.state_norm.apply(table.next_states);
  const Mat cond = vstack({&s, &sn});

  MinibatchPlan plan(table.size(), static_cast<std::size_t>(cfg.batch), derive_seed(cfg.seed, 0x1b));
  std::vector<double> ge(model.encoder.params.size()), gd(model.decoder.params.size());
  const auto per_epoch = plan.batches_per_epoch();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const auto idx = plan.next();
      const Mat eps = draw_latent(latent, static_cast<Eigen::Index>(idx.size()), ZMode::sample, &plan.rng());
      std::fill(ge.begin(), ge.end(), 0.0);
      std::fill(gd.begin(), gd.end(), 0.0);
      const double loss = nn::cvae_elbo_loss(
          model.encoder_spec, model.encoder.params, model.decoder_spec, model.decoder.params,
          nn::gather_columns(cond, idx), nn::gather_columns(table.actions, idx), eps, cfg.beta, ge, gd);
      check_finite_loss(loss, "inverse model");
      nn::adam_update(model.encoder, ge, cfg.adam);
      nn::adam_update(model.decoder, gd, cfg.adam);
      total += loss;
    }
    model.loss_history.push_back(total / static_cast<double>(per_epoch));
  }
  return model;
}

std::vector<double> generate_action(const InverseModel& model, std::span<const double> s,
                                    std::span<const double> s_next, ZMode mode, std::mt19937_64* rng) {
  if (s.size() != s_next.size() ||
      static_cast<Eigen::Index>(s.size()) != model.state_norm.mean.size()) {
    throw ShapeError("generate_action: state width");
  }
  const Mat a = model.state_norm.apply(column(s));
  const Mat b = model.state_norm.apply(column(s_next));
  const Mat z = draw_latent(model.latent_dim(), 1, mode, rng);
  const Mat in = vstack({&a, &b, &z});
  const auto out = nn::forward(model.decoder_spec, model.decoder, in);
  return {out.value.data(), out.value.data() + out.value.size()};
}

Mat generate_actions(const InverseModel& model, const Mat& states, const Mat& next_states) {
  const Mat a = model.state_norm.apply(states);
  const Mat b = model.state_norm.apply(next_states);
  const Mat z = Mat::Zero(model.latent_dim(), states.cols());
  return nn::forward(model.decoder_spec, model.decoder, vstack({&a, &b, &z})).value;
}

}  // namespace ts::models
