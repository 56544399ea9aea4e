#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tstitch/data.hpp"
#include "tstitch/nn/mlp.hpp"

namespace ts::models {

using nn::Mat;
using nn::Vec;

/// Column-stacked view of every transition in a dataset, in trajectory/step order.
struct TransitionTable {
  Mat states;
  Mat actions;
  Mat next_states;
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminal;

  std::size_t size() const { return rewards.size(); }
};

TransitionTable flatten(const Dataset& dataset);

/// Stacks matrices with equal column counts on top of each other.
Mat vstack(std::initializer_list<const Mat*> parts);

Mat column(std::span<const double> v);

/// How a latent variable is chosen when a generative model is queried.
enum class ZMode { prior_mean, sample };

Mat draw_latent(int rows, Eigen::Index cols, ZMode mode, std::mt19937_64* rng);

/// Shuffled minibatch schedule over [0, n), reshuffled each epoch from a seeded stream.
class MinibatchPlan {
 public:
  MinibatchPlan(std::size_t n, std::size_t batch, std::uint64_t seed);
  /// Next batch of indices; wraps into a freshly shuffled epoch when exhausted.
  std::span<const std::size_t> next();
  std::size_t batches_per_epoch() const;
  std::mt19937_64& rng() { return rng_; }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t cursor_ = 0;
  std::mt19937_64 rng_;
};

/// Train/holdout split by seeded permutation. Holdout has round(n * fraction) entries (at
/// least one when fraction > 0).
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};
Split split_indices(std::size_t n, double holdout_fraction, std::uint64_t seed);

/// Throws TrainingError when `loss` is not finite.
void check_finite_loss(double loss, const char* model);

}  // namespace ts::models
