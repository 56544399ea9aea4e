#include "tstitch/models/value_function.hpp"

#include <algorithm>

#include "tstitch/errors.hpp"
#include "tstitch/io_util.hpp"
#include "tstitch/models/common.hpp"
#include "tstitch/nn/losses.hpp"

namespace ts::models {

std::vector<double> StateValueFn::values(const nn::Mat& states) const {
  std::vector<double> out(static_cast<std::size_t>(states.cols()));
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    const nn::Vec col = states.col(j);
    out[static_cast<std::size_t>(j)] = value({col.data(), static_cast<std::size_t>(col.size())});
  }
  return out;
}

std::vector<double> ValueFunction::twin_values(int which, const nn::Mat& states) const {
  const auto out = nn::forward(spec, twins[which], state_norm.apply(states)).value;
  return {out.data(), out.data() + out.size()};
}

std::vector<double> ValueFunction::values(const nn::Mat& states) const {
  const nn::Mat x = state_norm.apply(states);
  const auto a = nn::forward(spec, twins[0], x).value;
  const auto b = nn::forward(spec, twins[1], x).value;
  std::vector<double> out(static_cast<std::size_t>(states.cols()));
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = std::min(a(0, static_cast<Eigen::Index>(j)), b(0, static_cast<Eigen::Index>(j)));
  }
  return out;
}

double ValueFunction::value(std::span<const double> s) const {
  if (static_cast<Eigen::Index>(s.size()) != state_norm.mean.size()) {
    throw ShapeError("value: state width");
  }
  return values(column(s)).front();
}

ValueFunction train_value(const Dataset& dataset, const ValueConfig& cfg) {
  const auto table = flatten(dataset);
  if (table.size() == 0) throw TrainingError("value function: empty dataset");
  ValueFunction vf;
  vf.gamma = cfg.gamma;
  vf.state_norm = nn::Normalizer::fit(vstack({&table.states}));
  vf.spec.layer_sizes = {static_cast<int>(dataset.dims.state)};
  for (int h : cfg.hidden) vf.spec.layer_sizes.push_back(h);
  vf.spec.layer_sizes.push_back(1);
  for (int k = 0; k < 2; ++k) {
    vf.twins[k] = nn::init_state(vf.spec, derive_seed(cfg.seed, 0x3a, static_cast<std::uint64_t>(k)),
                                 cfg.final_scale);
    vf.targets[k] = vf.twins[k];
  }

  const Mat s = vf.state_norm.apply(table.states);
  const Mat sn = vf.state_norm.apply(table.next_states);
  MinibatchPlan plan(table.size(), static_cast<std::size_t>(cfg.batch), derive_seed(cfg.seed, 0x3b));
  const auto per_epoch = plan.batches_per_epoch();
  std::vector<double> grad(vf.twins[0].params.size());
  std::vector<double> rewards, next_v;
  std::vector<std::uint8_t> term;
  long long updates = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const auto idx = plan.next();
      const Mat xs = nn::gather_columns(s, idx);
      const Mat xn = nn::gather_columns(sn, idx);
      const Mat t0 = nn::forward(vf.spec, vf.targets[0], xn).value;
      const Mat t1 = nn::forward(vf.spec, vf.targets[1], xn).value;
      rewards.resize(idx.size());
      next_v.resize(idx.size());
      term.resize(idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        rewards[j] = table.rewards[idx[j]];
        term[j] = table.terminal[idx[j]];
        next_v[j] = std::min(t0(0, c), t1(0, c));
      }
      const Mat targets = nn::bellman_targets(rewards, next_v, term, cfg.gamma);
      for (int k = 0; k < 2; ++k) {
        std::fill(grad.begin(), grad.end(), 0.0);
        const double loss = nn::bellman_mse_loss(vf.spec, vf.twins[k].params, xs, targets, grad);
        check_finite_loss(loss, "value function");
        nn::adam_update(vf.twins[k], grad, cfg.adam);
        total += loss;
      }
      if (++updates % cfg.target_refresh == 0) {
        vf.targets[0] = vf.twins[0];
        vf.targets[1] = vf.twins[1];
      }
    }
    vf.loss_history.push_back(total / static_cast<double>(per_epoch));
  }
  return vf;
}

}  // namespace ts::models
