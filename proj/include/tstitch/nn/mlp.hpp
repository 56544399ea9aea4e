#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ts::nn {

/// Column-major batches: one sample per column.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Activation { relu, tanh, identity };

enum class Head {
  linear,
  tanh_scaled,  // bound * tanh(z)
  gaussian,     // (mean, log-std) pairs; log-std clamped to [kMinLogStd, kMaxLogStd]
};

inline constexpr double kMinLogStd = -10.0;
inline constexpr double kMaxLogStd = 2.0;

struct MlpSpec {
  /// Input width, hidden widths..., logical output width. A gaussian head emits twice the
  /// last width (means followed by log-stds).
  std::vector<int> layer_sizes;
  Activation hidden = Activation::relu;
  Head head = Head::linear;
  double bound = 1.0;  // tanh_scaled only

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int layer_count() const { return static_cast<int>(layer_sizes.size()) - 1; }
  /// Width of layer `l`'s output (the raw width of the final layer for gaussian heads).
  int out_width(int l) const;
  std::size_t param_count() const;
  /// Throws std::invalid_argument when the spec breaks its invariants.
  void check() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Parameters plus Adam moments. Layer l stores W_l (out x in, column-major) then b_l.
struct MlpState {
  std::vector<double> params;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::uint64_t step_count = 0;

  void reset_optimizer();
};

/// Glorot-uniform weights, zero biases; the final layer is multiplied by `final_scale`.
MlpState init_state(const MlpSpec& spec, std::uint64_t seed, double final_scale = 1.0);

struct ForwardCache {
  std::vector<Mat> pre;  // pre-activations per layer
  std::vector<Mat> act;  // act[0] = input, act[l] = output of hidden layer l
  Mat raw_log_std;       // unclamped log-std for gaussian heads
};

struct HeadOutput {
  Mat value;    // outputs, or means for a gaussian head
  Mat log_std;  // gaussian head only, already clamped
};

HeadOutput forward(const MlpSpec& spec, std::span<const double> params, const Mat& input,
                   ForwardCache* cache = nullptr);

inline HeadOutput forward(const MlpSpec& spec, const MlpState& state, const Mat& input,
                          ForwardCache* cache = nullptr) {
  return forward(spec, state.params, input, cache);
}

/// Reverse pass. Adds dL/dparams into `grad` and returns dL/dinput. `d_log_std` is read only
/// for gaussian heads; gradients through a clamped log-std are zero.
Mat backward(const MlpSpec& spec, std::span<const double> params, const ForwardCache& cache,
             const Mat& d_value, const Mat* d_log_std, std::span<double> grad);

/// Smallest |pre-activation| over hidden units; relu kinks make finite differences unreliable
/// near zero.
double min_abs_preactivation(const MlpSpec& spec, std::span<const double> params,
                             const Mat& input);

/// Per-feature affine standardisation, fitted on columns of a batch.
struct Normalizer {
  Vec mean;
  Vec scale;

  static Normalizer fit(const Mat& data, double min_scale = 1e-6);
  static Normalizer identity(int width);
  Mat apply(const Mat& data) const;
  Mat invert(const Mat& data) const;
  int width() const { return static_cast<int>(mean.size()); }
};

/// Columns `cols` of `m`.
Mat gather_columns(const Mat& m, std::span<const std::size_t> cols);

}  // namespace ts::nn
