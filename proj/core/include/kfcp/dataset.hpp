#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kfcp/linalg.hpp"

namespace kfcp {

/// Predictor matrix (one observation per row) paired with a response vector.
struct Dataset {
  DenseMatrix x;
  std::vector<double> y;

  [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return x.cols(); }

  /// Throws InsufficientData if n < 2, DimensionMismatch if rows and
  /// responses disagree, InvalidArgument on non-finite values.
  void validate() const;

  /// Rows at `indices`, in that order.
  [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;
};

}  // namespace kfcp
