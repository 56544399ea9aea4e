#pragma once

#include <span>

#include "tstitch/nn/mlp.hpp"

namespace ts::nn {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 0.0;  // decoupled weight decay, applied as lr * l2 * param
};

/// One bias-corrected Adam step. Throws std::invalid_argument on length mismatch or
/// non-finite gradient entries.
void adam_update(MlpState& state, std::span<const double> grad, const AdamHyper& hyper);

/// Clamp every parameter to [-limit, limit].
void clip_params(MlpState& state, double limit);

}  // namespace ts::nn
