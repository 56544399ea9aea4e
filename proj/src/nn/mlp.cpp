#include "tstitch/nn/mlp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "tstitch/errors.hpp"

namespace ts::nn {

namespace {

using ConstMatMap = Eigen::Map<const Mat>;
using ConstVecMap = Eigen::Map<const Vec>;
using MatMap = Eigen::Map<Mat>;
using VecMap = Eigen::Map<Vec>;

Mat activate(Activation a, const Mat& z) {
  switch (a) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::identity: return z;
  }
  return z;
}

// d act / d z evaluated from z, multiplied into upstream.
void apply_activation_grad(Activation a, const Mat& z, Mat& upstream) {
  switch (a) {
    case Activation::relu: upstream.array() *= (z.array() > 0.0).cast<double>(); break;
    case Activation::tanh: upstream.array() *= 1.0 - z.array().tanh().square(); break;
    case Activation::identity: break;
  }
}

}  // namespace

int MlpSpec::out_width(int l) const {
  const int w = layer_sizes[static_cast<std::size_t>(l) + 1];
  return (l == layer_count() - 1 && head == Head::gaussian) ? 2 * w : w;
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (int l = 0; l < layer_count(); ++l) {
    const auto in = static_cast<std::size_t>(layer_sizes[static_cast<std::size_t>(l)]);
    const auto out = static_cast<std::size_t>(out_width(l));
    n += out * in + out;
  }
  return n;
}

void MlpSpec::check() const {
  if (layer_sizes.size() < 2) throw std::invalid_argument("MlpSpec: need input and output sizes");
  for (int s : layer_sizes) {
    if (s <= 0) throw std::invalid_argument("MlpSpec: layer sizes must be positive");
  }
  if (head == Head::tanh_scaled && !(bound > 0.0)) {
    throw std::invalid_argument("MlpSpec: tanh_scaled bound must be positive");
  }
}

void MlpState::reset_optimizer() {
  adam_m.assign(params.size(), 0.0);
  adam_v.assign(params.size(), 0.0);
  step_count = 0;
}

MlpState init_state(const MlpSpec& spec, std::uint64_t seed, double final_scale) {
  spec.check();
  MlpState st;
  st.params.assign(spec.param_count(), 0.0);
  std::mt19937_64 rng(seed);
  std::size_t off = 0;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.layer_sizes[static_cast<std::size_t>(l)];
    const int out = spec.out_width(l);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    const double scale = (l == spec.layer_count() - 1) ? final_scale : 1.0;
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (int i = 0; i < in * out; ++i) st.params[off + static_cast<std::size_t>(i)] = scale * dist(rng);
    off += static_cast<std::size_t>(in * out + out);
  }
  st.reset_optimizer();
  return st;
}

HeadOutput forward(const MlpSpec& spec, std::span<const double> params, const Mat& input,
                   ForwardCache* cache) {
  if (input.rows() != spec.input_dim()) {
    throw ShapeError("mlp forward: input width " + std::to_string(input.rows()) +
                                ", expected " + std::to_string(spec.input_dim()));
  }
  if (params.size() != spec.param_count()) {
    throw ShapeError("mlp forward: parameter count mismatch");
  }
  if (cache) {
    cache->pre.clear();
    cache->act.clear();
    cache->act.push_back(input);
  }
  Mat a = input;
  std::size_t off = 0;
  const int L = spec.layer_count();
  for (int l = 0; l < L; ++l) {
    const int in = spec.layer_sizes[static_cast<std::size_t>(l)];
    const int out = spec.out_width(l);
    ConstMatMap W(params.data() + off, out, in);
    ConstVecMap b(params.data() + off + static_cast<std::size_t>(out * in), out);
    off += static_cast<std::size_t>(out * in + out);
    Mat z = W * a;
    z.colwise() += b;
    if (l + 1 < L) {
      a = activate(spec.hidden, z);
      if (cache) {
        cache->pre.push_back(std::move(z));
        cache->act.push_back(a);
      }
    } else {
      if (cache) cache->pre.push_back(z);
      HeadOutput out_head;
      const int d = spec.output_dim();
      switch (spec.head) {
        case Head::linear: out_head.value = std::move(z); break;
        case Head::tanh_scaled: out_head.value = spec.bound * z.array().tanh().matrix(); break;
        case Head::gaussian:
          out_head.value = z.topRows(d);
          out_head.log_std = z.bottomRows(d).cwiseMax(kMinLogStd).cwiseMin(kMaxLogStd);
          if (cache) cache->raw_log_std = z.bottomRows(d);
          break;
      }
      return out_head;
    }
  }
  return {};
}

Mat backward(const MlpSpec& spec, std::span<const double> params, const ForwardCache& cache,
             const Mat& d_value, const Mat* d_log_std, std::span<double> grad) {
  const int L = spec.layer_count();
  const int d = spec.output_dim();
  const Mat& z_last = cache.pre.back();
  Mat dz(z_last.rows(), z_last.cols());
  switch (spec.head) {
    case Head::linear: dz = d_value; break;
    case Head::tanh_scaled:
      dz = (d_value.array() * spec.bound * (1.0 - z_last.array().tanh().square())).matrix();
      break;
    case Head::gaussian: {
      dz.topRows(d) = d_value;
      if (d_log_std) {
        const auto inside = ((cache.raw_log_std.array() >= kMinLogStd) &&
                             (cache.raw_log_std.array() <= kMaxLogStd))
                                .cast<double>();
        dz.bottomRows(d) = (d_log_std->array() * inside).matrix();
      } else {
        dz.bottomRows(d).setZero();
      }
      break;
    }
  }

  // Offsets of each layer in the flat parameter vector.
  std::vector<std::size_t> offsets(static_cast<std::size_t>(L));
  std::size_t off = 0;
  for (int l = 0; l < L; ++l) {
    offsets[static_cast<std::size_t>(l)] = off;
    off += static_cast<std::size_t>(spec.out_width(l) * spec.layer_sizes[static_cast<std::size_t>(l)] +
                                    spec.out_width(l));
  }

  Mat upstream;
  for (int l = L - 1; l >= 0; --l) {
    const int in = spec.layer_sizes[static_cast<std::size_t>(l)];
    const int out = spec.out_width(l);
    const auto o = offsets[static_cast<std::size_t>(l)];
    const Mat& a_prev = cache.act[static_cast<std::size_t>(l)];
    MatMap gW(grad.data() + o, out, in);
    VecMap gb(grad.data() + o + static_cast<std::size_t>(out * in), out);
    gW.noalias() += dz * a_prev.transpose();
    gb += dz.rowwise().sum();
    ConstMatMap W(params.data() + o, out, in);
    upstream = W.transpose() * dz;
    if (l > 0) {
      apply_activation_grad(spec.hidden, cache.pre[static_cast<std::size_t>(l - 1)], upstream);
      dz = std::move(upstream);
    }
  }
  return upstream;
}

double min_abs_preactivation(const MlpSpec& spec, std::span<const double> params,
                             const Mat& input) {
  ForwardCache cache;
  forward(spec, params, input, &cache);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < cache.pre.size(); ++l) {
    m = std::min(m, cache.pre[l].cwiseAbs().minCoeff());
  }
  return m;
}

Normalizer Normalizer::fit(const Mat& data, double min_scale) {
  Normalizer n;
  const auto cols = static_cast<double>(std::max<Eigen::Index>(data.cols(), 1));
  n.mean = data.rowwise().sum() / cols;
  const Mat centered = data.colwise() - n.mean;
  n.scale = (centered.array().square().rowwise().sum() / cols).sqrt().matrix();
  for (Eigen::Index i = 0; i < n.scale.size(); ++i) n.scale[i] = std::max(n.scale[i], min_scale);
  return n;
}

Normalizer Normalizer::identity(int width) {
  return Normalizer{Vec::Zero(width), Vec::Ones(width)};
}

Mat Normalizer::apply(const Mat& data) const {
  return ((data.colwise() - mean).array().colwise() / scale.array()).matrix();
}

Mat Normalizer::invert(const Mat& data) const {
  return ((data.array().colwise() * scale.array()).matrix().colwise() + mean);
}

Mat gather_columns(const Mat& m, std::span<const std::size_t> cols) {
  Mat out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(cols[j]));
  }
  return out;
}

}  // namespace ts::nn
