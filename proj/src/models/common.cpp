#include "tstitch/models/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tstitch/errors.hpp"

namespace ts::models {

TransitionTable flatten(const Dataset& dataset) {
  const auto n = static_cast<Eigen::Index>(dataset.transition_count());
  const auto dS = static_cast<Eigen::Index>(dataset.dims.state);
  const auto dA = static_cast<Eigen::Index>(dataset.dims.action);
  TransitionTable t;
  t.states.resize(dS, n);
  t.actions.resize(dA, n);
  t.next_states.resize(dS, n);
  t.rewards.reserve(static_cast<std::size_t>(n));
  t.terminal.reserve(static_cast<std::size_t>(n));
  Eigen::Index j = 0;
  for (const auto& traj : dataset.trajectories) {
    for (const auto& tr : traj.steps) {
      for (Eigen::Index i = 0; i < dS; ++i) {
        t.states(i, j) = tr.state[static_cast<std::size_t>(i)];
        t.next_states(i, j) = tr.next_state[static_cast<std::size_t>(i)];
      }
      for (Eigen::Index i = 0; i < dA; ++i) t.actions(i, j) = tr.action[static_cast<std::size_t>(i)];
      t.rewards.push_back(tr.reward);
      t.terminal.push_back(tr.terminal ? 1 : 0);
      ++j;
    }
  }
  return t;
}

Mat vstack(std::initializer_list<const Mat*> parts) {
  Eigen::Index rows = 0;
  const Eigen::Index cols = (*parts.begin())->cols();
  for (const auto* p : parts) rows += p->rows();
  Mat out(rows, cols);
  Eigen::Index r = 0;
  for (const auto* p : parts) {
    out.middleRows(r, p->rows()) = *p;
    r += p->rows();
  }
  return out;
}

Mat column(std::span<const double> v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Mat draw_latent(int rows, Eigen::Index cols, ZMode mode, std::mt19937_64* rng) {
  Mat z = Mat::Zero(rows, cols);
  if (mode == ZMode::sample) {
    if (!rng) throw std::invalid_argument("draw_latent: sampling needs an RNG");
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (int i = 0; i < rows; ++i) z(i, j) = normal(*rng);
    }
  }
  return z;
}

MinibatchPlan::MinibatchPlan(std::size_t n, std::size_t batch, std::uint64_t seed)
    : order_(n), batch_(std::max<std::size_t>(1, std::min(batch, n))), rng_(seed) {
  std::iota(order_.begin(), order_.end(), 0);
  std::shuffle(order_.begin(), order_.end(), rng_);
}

std::span<const std::size_t> MinibatchPlan::next() {
  if (cursor_ >= order_.size()) {
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }
  const auto len = std::min(batch_, order_.size() - cursor_);
  std::span<const std::size_t> out(order_.data() + cursor_, len);
  cursor_ += len;
  return out;
}

std::size_t MinibatchPlan::batches_per_epoch() const {
  return (order_.size() + batch_ - 1) / batch_;
}

Split split_indices(std::size_t n, double holdout_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::size_t k = 0;
  if (holdout_fraction > 0.0) {
    k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(holdout_fraction * n)));
    k = std::min(k, n > 0 ? n - 1 : 0);
  }
  Split s;
  s.holdout.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  std::sort(s.holdout.begin(), s.holdout.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

void check_finite_loss(double loss, const char* model) {
  if (!std::isfinite(loss)) throw TrainingError(std::string(model) + ": loss became non-finite");
}

}  // namespace ts::models
