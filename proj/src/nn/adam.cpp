#include "tstitch/nn/adam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ts::nn {

void adam_update(MlpState& state, std::span<const double> grad, const AdamHyper& hyper) {
  const auto n = state.params.size();
  if (grad.size() != n || state.adam_m.size() != n || state.adam_v.size() != n) {
    throw std::invalid_argument("adam_update: length mismatch");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    if (!std::isfinite(g)) throw std::invalid_argument("adam_update: non-finite gradient");
    auto& m = state.adam_m[i];
    auto& v = state.adam_v[i];
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    auto& p = state.params[i];
    p -= hyper.lr * (m_hat / (std::sqrt(v_hat) + hyper.eps) + hyper.l2 * p);
  }
}

void clip_params(MlpState& state, double limit) {
  for (auto& p : state.params) p = std::clamp(p, -limit, limit);
}

}  // namespace ts::nn
