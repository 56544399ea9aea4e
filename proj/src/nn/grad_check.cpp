#include "tstitch/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ts::nn {

GradCheckResult grad_check(const LossFunction& loss, std::span<const double> point, double h,
                           std::size_t max_coords, std::uint64_t seed, double abs_floor) {
  const auto n = point.size();
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> analytic(n, 0.0);
  loss(x, analytic);

  std::vector<std::size_t> coords(n);
  std::iota(coords.begin(), coords.end(), 0);
  if (max_coords > 0 && max_coords < n) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckResult res;
  for (auto i : coords) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = loss(x, {});
    x[i] = saved - h;
    const double down = loss(x, {});
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), abs_floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_index = i;
    }
    ++res.checked;
  }
  return res;
}

}  // namespace ts::nn
