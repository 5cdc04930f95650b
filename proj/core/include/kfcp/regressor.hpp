#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>

#include "kfcp/dataset.hpp"
#include "kfcp/rng.hpp"

namespace kfcp {

/// A fitted point predictor m-hat(x). Fitted regressors are immutable.
class Regressor {
 public:
  virtual ~Regressor() = default;
  [[nodiscard]] virtual std::size_t input_dim() const noexcept = 0;
  /// Throws DimensionMismatch when x.size() != input_dim().
  [[nodiscard]] virtual double predict(std::span<const double> x) const = 0;
};

using RegressorPtr = std::shared_ptr<const Regressor>;

/// Fits a regressor to a dataset. Must be callable concurrently from
/// several threads, each with its own stream.
using Trainer = std::function<RegressorPtr(const Dataset&, RngStream&)>;

/// Ignores the data and always predicts `value`.
Trainer make_constant_trainer(double value);

/// Ignores the data and returns `fn` as the fitted mean, e.g. the true mean
/// function of a simulation.
Trainer make_function_trainer(std::function<double(std::span<const double>)> fn);

}  // namespace kfcp
