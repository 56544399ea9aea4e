#pragma once

#include <span>
#include <vector>

#include "tstitch/data.hpp"
#include "tstitch/nn/adam.hpp"
#include "tstitch/nn/mlp.hpp"

namespace ts::models {

/// Anything that scores states. Stitching only needs this view of a value function.
class StateValueFn {
 public:
  virtual ~StateValueFn() = default;
  virtual double value(std::span<const double> s) const = 0;
  /// One value per column of `states`.
  virtual std::vector<double> values(const nn::Mat& states) const;
};

struct ValueConfig {
  std::vector<int> hidden{256, 256};
  double gamma = 0.99;
  int epochs = 50;
  int batch = 256;
  nn::AdamHyper adam{3e-4};
  int target_refresh = 100;  // updates between target-copy refreshes
  double final_scale = 0.01;
  std::uint64_t seed = 0;
};

/// Twin V networks trained on the squared Bellman error; the estimate is their minimum.
class ValueFunction final : public StateValueFn {
 public:
  nn::MlpSpec spec;
  nn::MlpState twins[2];
  nn::MlpState targets[2];
  double gamma = 0.99;
  nn::Normalizer state_norm;
  std::vector<double> loss_history;  // mean Bellman loss (both twins summed) per epoch

  double value(std::span<const double> s) const override;
  std::vector<double> values(const nn::Mat& states) const override;
  /// Output of one twin (0 or 1) on raw states.
  std::vector<double> twin_values(int which, const nn::Mat& states) const;
};

/// Fresh initialisation every call. Terminal transitions bootstrap nothing. Throws
/// TrainingError on a non-finite loss.
ValueFunction train_value(const Dataset& dataset, const ValueConfig& cfg);

}  // namespace ts::models
