#pragma once

#include <span>

namespace kfcp {

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Sample quantile by linear interpolation between closest ranks:
/// h = (n - 1) * prob, result = x[floor(h)] + (h - floor(h)) * (x[floor(h)+1] - x[floor(h)])
/// over the sorted sample. Throws InvalidArgument on an empty sample.
double interpolated_quantile(std::span<const double> values, double prob);

Quartiles quartiles(std::span<const double> values);

double mean(std::span<const double> values);

}  // namespace kfcp
