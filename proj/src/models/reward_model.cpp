#include "tstitch/models/reward_model.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "tstitch/errors.hpp"
#include "tstitch/io_util.hpp"
#include "tstitch/nn/losses.hpp"

namespace ts::models {

const char* to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::wgan: return "wgan";
    case RewardKind::mlp: return "mlp";
    case RewardKind::gaussian: return "gaussian";
    case RewardKind::vae: return "vae";
  }
  return "?";
}

RewardKind reward_kind_from_string(std::string_view name) {
  for (auto k : {RewardKind::wgan, RewardKind::mlp, RewardKind::gaussian, RewardKind::vae}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown reward model kind '" + std::string(name) + "'");
}

namespace {

nn::MlpSpec make_spec(int in, const std::vector<int>& hidden, int out, nn::Head head) {
  nn::MlpSpec spec;
  spec.layer_sizes.push_back(in);
  for (int h : hidden) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(out);
  spec.head = head;
  return spec;
}

Mat row(std::span<const std::size_t> idx, const Mat& m) { return nn::gather_columns(m, idx); }

}  // namespace

RewardModel train_reward_model(const Dataset& dataset, const RewardConfig& cfg) {
  const auto table = flatten(dataset);
  if (table.size() == 0) throw TrainingError("reward model: empty dataset");
  RewardModel model;
  model.kind = cfg.kind;

  const Mat raw_in = vstack({&table.states, &table.actions, &table.next_states});
  Mat raw_r = Eigen::Map<const Mat>(table.rewards.data(), 1, static_cast<Eigen::Index>(table.size()));
  model.input_norm = nn::Normalizer::fit(raw_in);
  model.reward_norm = nn::Normalizer::fit(raw_r);
  const Mat x = model.input_norm.apply(raw_in);
  const Mat y = model.reward_norm.apply(raw_r);
  const int in = static_cast<int>(x.rows());

  MinibatchPlan plan(table.size(), static_cast<std::size_t>(cfg.batch), derive_seed(cfg.seed, 0x2b));
  const auto per_epoch = plan.batches_per_epoch();
  auto& rng = plan.rng();

  switch (cfg.kind) {
    case RewardKind::mlp:
    case RewardKind::gaussian: {
      const bool gauss = cfg.kind == RewardKind::gaussian;
      model.main_spec = make_spec(in, cfg.hidden, 1, gauss ? nn::Head::gaussian : nn::Head::linear);
      model.main = nn::init_state(model.main_spec, derive_seed(cfg.seed, 0x2a));
      std::vector<double> g(model.main.params.size());
      for (int e = 0; e < cfg.epochs; ++e) {
        double total = 0.0;
        for (std::size_t b = 0; b < per_epoch; ++b) {
          const auto idx = plan.next();
          std::fill(g.begin(), g.end(), 0.0);
          const double loss = gauss ? nn::gaussian_nll_loss(model.main_spec, model.main.params,
                                                            row(idx, x), row(idx, y), g)
                                    : nn::mse_loss(model.main_spec, model.main.params, row(idx, x),
                                                   row(idx, y), g);
          check_finite_loss(loss, "reward model");
          nn::adam_update(model.main, g, cfg.adam);
          total += loss;
        }
        model.loss_history.push_back(total / static_cast<double>(per_epoch));
      }
      break;
    }
    case RewardKind::vae: {
      model.z_dim = cfg.z_dim;
      model.aux_spec = make_spec(in + 1, cfg.hidden, cfg.z_dim, nn::Head::gaussian);
      model.main_spec = make_spec(in + cfg.z_dim, cfg.hidden, 1, nn::Head::linear);
      model.aux = nn::init_state(model.aux_spec, derive_seed(cfg.seed, 0x2e));
      model.main = nn::init_state(model.main_spec, derive_seed(cfg.seed, 0x2d));
      std::vector<double> ge(model.aux.params.size()), gd(model.main.params.size());
      for (int e = 0; e < cfg.epochs; ++e) {
        double total = 0.0;
        for (std::size_t b = 0; b < per_epoch; ++b) {
          const auto idx = plan.next();
          const Mat eps = draw_latent(cfg.z_dim, static_cast<Eigen::Index>(idx.size()), ZMode::sample, &rng);
          std::fill(ge.begin(), ge.end(), 0.0);
          std::fill(gd.begin(), gd.end(), 0.0);
          const double loss = nn::cvae_elbo_loss(model.aux_spec, model.aux.params, model.main_spec,
                                                 model.main.params, row(idx, x), row(idx, y), eps,
                                                 cfg.beta, ge, gd);
          check_finite_loss(loss, "reward model");
          nn::adam_update(model.aux, ge, cfg.adam);
          nn::adam_update(model.main, gd, cfg.adam);
          total += loss;
        }
        model.loss_history.push_back(total / static_cast<double>(per_epoch));
      }
      break;
    }
    case RewardKind::wgan: {
      model.z_dim = cfg.z_dim;
      model.main_spec = make_spec(cfg.z_dim + in, cfg.hidden, 1, nn::Head::linear);
      model.aux_spec = make_spec(in + 1, cfg.hidden, 1, nn::Head::linear);
      model.main = nn::init_state(model.main_spec, derive_seed(cfg.seed, 0x2f));
      model.aux = nn::init_state(model.aux_spec, derive_seed(cfg.seed, 0x2c));
      nn::clip_params(model.aux, cfg.clip);
      std::vector<double> gg(model.main.params.size()), gc(model.aux.params.size());
      for (int e = 0; e < cfg.epochs; ++e) {
        double total = 0.0;
        for (std::size_t b = 0; b < per_epoch; ++b) {
          for (int c = 0; c < cfg.n_critic; ++c) {
            const auto idx = plan.next();
            const Mat cond = row(idx, x);
            const Mat z = draw_latent(cfg.z_dim, cond.cols(), ZMode::sample, &rng);
            const Mat gen_in = vstack({&z, &cond});
            const Mat fake_r = nn::forward(model.main_spec, model.main, gen_in).value;
            const Mat real_r = row(idx, y);
            const Mat real = vstack({&cond, &real_r});
            const Mat fake = vstack({&cond, &fake_r});
            std::fill(gc.begin(), gc.end(), 0.0);
            const double loss = nn::wgan_disc_loss(model.aux_spec, model.aux.params, real, fake, gc);
            check_finite_loss(loss, "reward critic");
            nn::adam_update(model.aux, gc, cfg.adam);
            nn::clip_params(model.aux, cfg.clip);
          }
          const auto idx = plan.next();
          const Mat cond = row(idx, x);
          const Mat z = draw_latent(cfg.z_dim, cond.cols(), ZMode::sample, &rng);
          std::fill(gg.begin(), gg.end(), 0.0);
          const double loss = nn::wgan_gen_loss(model.main_spec, model.main.params, model.aux_spec,
                                                model.aux.params, cond, z, gg);
          check_finite_loss(loss, "reward generator");
          nn::adam_update(model.main, gg, cfg.adam);
          total += loss;
        }
        model.loss_history.push_back(total / static_cast<double>(per_epoch));
      }
      break;
    }
  }
  return model;
}

namespace {

Mat predict_normalized(const RewardModel& model, const Mat& x, ZMode mode, std::mt19937_64* rng) {
  switch (model.kind) {
    case RewardKind::mlp:
    case RewardKind::gaussian: return nn::forward(model.main_spec, model.main, x).value;
    case RewardKind::vae:
    case RewardKind::wgan: {
      const Mat z = draw_latent(model.z_dim, x.cols(), mode, rng);
      const Mat in = model.kind == RewardKind::vae ? vstack({&x, &z}) : vstack({&z, &x});
      return nn::forward(model.main_spec, model.main, in).value;
    }
  }
  return {};
}

}  // namespace

double predict_reward(const RewardModel& model, std::span<const double> s, std::span<const double> a,
                      std::span<const double> s_next, ZMode mode, std::mt19937_64* rng) {
  const Mat sm = column(s), am = column(a), snm = column(s_next);
  const Mat raw = vstack({&sm, &am, &snm});
  if (raw.rows() != model.input_norm.mean.size()) throw ShapeError("predict_reward: input width");
  const Mat r = predict_normalized(model, model.input_norm.apply(raw), mode, rng);
  return model.reward_norm.invert(r)(0, 0);
}

std::vector<double> predict_rewards(const RewardModel& model, const Mat& states, const Mat& actions,
                                    const Mat& next_states) {
  const Mat raw = vstack({&states, &actions, &next_states});
  const Mat r = model.reward_norm.invert(
      predict_normalized(model, model.input_norm.apply(raw), ZMode::prior_mean, nullptr));
  return {r.data(), r.data() + r.size()};
}

}  // namespace ts::models
