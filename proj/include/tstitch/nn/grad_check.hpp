#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ts::nn {

/// Loss evaluated at a flat parameter point. When `grad` is non-empty it must be filled
/// (not accumulated) with the analytic gradient.
using LossFunction = std::function<double(std::span<const double> params, std::span<double> grad)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Central differences with step `h` over every coordinate, or over a seeded random subset of
/// `max_coords` coordinates when the point is larger. Relative error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, abs_floor).
GradCheckResult grad_check(const LossFunction& loss, std::span<const double> point,
                           double h = 1e-5, std::size_t max_coords = 0, std::uint64_t seed = 0,
                           double abs_floor = 1e-6);

}  // namespace ts::nn
