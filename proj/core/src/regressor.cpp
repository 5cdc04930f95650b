#include "kfcp/regressor.hpp"

#include <string>
#include <utility>

#include "kfcp/error.hpp"

namespace kfcp {
namespace {

class FunctionRegressor final : public Regressor {
 public:
  FunctionRegressor(std::size_t dim, std::function<double(std::span<const double>)> fn)
      : dim_(dim), fn_(std::move(fn)) {}

  std::size_t input_dim() const noexcept override { return dim_; }

  double predict(std::span<const double> x) const override {
    if (x.size() != dim_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "expected " + std::to_string(dim_) + " predictors, got " +
                      std::to_string(x.size()));
    }
    return fn_(x);
  }

 private:
  std::size_t dim_;
  std::function<double(std::span<const double>)> fn_;
};

}  // namespace

Trainer make_constant_trainer(double value) {
  return [value](const Dataset& data, RngStream&) -> RegressorPtr {
    return std::make_shared<FunctionRegressor>(data.dim(),
                                               [value](std::span<const double>) { return value; });
  };
}

Trainer make_function_trainer(std::function<double(std::span<const double>)> fn) {
  return [fn = std::move(fn)](const Dataset& data, RngStream&) -> RegressorPtr {
    return std::make_shared<FunctionRegressor>(data.dim(), fn);
  };
}

}  // namespace kfcp
