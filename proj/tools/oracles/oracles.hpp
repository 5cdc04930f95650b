#pragma once

// Independent reference computations used by `kfcp selftest` and the test
// suites. Nothing here calls the routine it is meant to check.

#include <cstddef>
#include <span>

#include "kfcp/linalg.hpp"
#include "kfcp/mlp.hpp"

namespace kfcp::oracle {

/// Sorts |residuals| and walks ranks upward until r >= level * (m + 1),
/// capped at m.
double brute_force_conformal_quantile(std::span<const double> residuals, double level);

struct GradientCheck {
  std::size_t entries = 0;
  std::size_t violations = 0;
  double max_relative_error = 0.0;
};

/// Compares mse_loss_and_gradients against central differences of the batch
/// loss evaluated through forward(). An entry passes when the absolute gap
/// is <= abs_floor or the relative gap is < rel_tol.
GradientCheck check_gradients(const MlpRegressor& model, const DenseMatrix& batch_x,
                              std::span<const double> batch_y, double h = 1e-5,
                              double rel_tol = 1e-4, double abs_floor = 1e-8);

}  // namespace kfcp::oracle
