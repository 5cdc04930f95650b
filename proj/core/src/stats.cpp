#include "kfcp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "kfcp/error.hpp"

namespace kfcp {

double interpolated_quantile(std::span<const double> values, double prob) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * std::clamp(prob, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Quartiles quartiles(std::span<const double> values) {
  return {interpolated_quantile(values, 0.25), interpolated_quantile(values, 0.5),
          interpolated_quantile(values, 0.75)};
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "mean of an empty sample");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace kfcp
