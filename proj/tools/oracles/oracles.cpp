#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "kfcp/error.hpp"

namespace kfcp::oracle {
namespace {

double batch_loss(const MlpRegressor& model, const DenseMatrix& x, std::span<const double> y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = forward(model, x.row(i)) - y[i];
    sum += r * r;
  }
  return sum / static_cast<double>(y.size());
}

}  // namespace

double brute_force_conformal_quantile(std::span<const double> residuals, double level) {
  if (residuals.empty()) throw Error(ErrorCode::EmptyResiduals, "no residuals");
  std::vector<double> sorted;
  for (double d : residuals) sorted.push_back(std::abs(d));
  std::sort(sorted.begin(), sorted.end());
  const double target = level * static_cast<double>(sorted.size() + 1) - 1e-9;
  std::size_t r = 1;
  while (static_cast<double>(r) < target && r < sorted.size()) ++r;
  return sorted[r - 1];
}

GradientCheck check_gradients(const MlpRegressor& model, const DenseMatrix& batch_x,
                              std::span<const double> batch_y, double h, double rel_tol,
                              double abs_floor) {
  const LossAndGradients analytic = mse_loss_and_gradients(model, batch_x, batch_y);

  std::vector<double> numeric;
  MlpRegressor probe = model;
  probe.parameters().for_each([&](double& theta) {
    const double saved = theta;
    theta = saved + h;
    const double up = batch_loss(probe, batch_x, batch_y);
    theta = saved - h;
    const double down = batch_loss(probe, batch_x, batch_y);
    theta = saved;
    numeric.push_back((up - down) / (2.0 * h));
  });

  std::vector<double> exact;
  ParameterSet grads = analytic.gradients;
  grads.for_each([&](double& g) { exact.push_back(g); });

  GradientCheck result;
  result.entries = exact.size();
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double gap = std::abs(exact[i] - numeric[i]);
    const double scale = std::max(std::abs(exact[i]), std::abs(numeric[i]));
    const double rel = scale > 0.0 ? gap / scale : 0.0;
    if (gap > abs_floor) result.max_relative_error = std::max(result.max_relative_error, rel);
    if (gap > abs_floor && !(rel < rel_tol)) ++result.violations;
  }
  return result;
}

}  // namespace kfcp::oracle
