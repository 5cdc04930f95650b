#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "kfcp/dataset.hpp"
#include "kfcp/linalg.hpp"
#include "kfcp/regressor.hpp"
#include "kfcp/rng.hpp"

namespace kfcp {

enum class Activation { relu, tanh };

std::string_view to_string(Activation activation) noexcept;
/// Accepts "relu" or "tanh"; throws InvalidArgument otherwise.
Activation parse_activation(std::string_view text);

struct MlpConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_layers{15, 15};
  Activation activation = Activation::relu;
  double learning_rate = 3e-4;
  std::size_t batch_size = 32;
  std::size_t iterations = 20000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;

  /// Simulation-study recipe: 2x15 ReLU, batch 32, lr 0.0003, 20,000 steps.
  static MlpConfig simulation_defaults(std::size_t input_dim);
  /// Real-data recipe: 2x10 ReLU, batch 16, lr 0.0003, 25,000 steps.
  static MlpConfig real_data_defaults(std::size_t input_dim);

  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

/// One array per trainable tensor, laid out like the network: weights[l] is
/// (out x in) for layer l, biases[l] has `out` entries. The last layer is
/// the linear output unit. Used for parameters, gradients and Adam moments.
struct ParameterSet {
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;

  /// All-zero set shaped for `config`.
  static ParameterSet zeros(const MlpConfig& config);
  [[nodiscard]] std::size_t count() const noexcept;
  [[nodiscard]] bool same_shape(const ParameterSet& other) const noexcept;
  [[nodiscard]] bool all_finite() const noexcept;

  /// Visits every scalar in a fixed order (layer, weights row-major, then biases).
  template <typename F>
  void for_each(F&& f) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (double& w : weights[l].values()) f(w);
      for (double& b : biases[l]) f(b);
    }
  }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

/// Feed-forward regressor: hidden layers with a shared activation followed
/// by a single linear output unit.
class MlpRegressor final : public Regressor {
 public:
  /// All parameters zero, untrained.
  explicit MlpRegressor(MlpConfig config);
  MlpRegressor(MlpConfig config, ParameterSet parameters, bool trained);

  [[nodiscard]] const MlpConfig& config() const noexcept { return config_; }
  [[nodiscard]] const ParameterSet& parameters() const noexcept { return params_; }
  [[nodiscard]] ParameterSet& parameters() noexcept { return params_; }
  [[nodiscard]] bool trained() const noexcept { return trained_; }
  void mark_trained() noexcept { trained_ = true; }

  std::size_t input_dim() const noexcept override { return config_.input_dim; }
  double predict(std::span<const double> x) const override;

 private:
  MlpConfig config_;
  ParameterSet params_;
  bool trained_ = false;
};

struct AdamState {
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::uint64_t step_count = 0;

  static AdamState zeros(const MlpConfig& config);
};

struct LossAndGradients {
  double loss = 0.0;
  ParameterSet gradients;
};

/// Glorot-uniform weights on +-sqrt(6 / (fan_in + fan_out)), zero biases.
MlpRegressor xavier_init(const MlpConfig& config, RngStream& stream);

/// Scalar prediction; throws DimensionMismatch on a wrong-length input.
double forward(const MlpRegressor& model, std::span<const double> x);

/// Mean squared error over the batch and its exact gradient by backprop.
LossAndGradients mse_loss_and_gradients(const MlpRegressor& model, const DenseMatrix& batch_x,
                                        std::span<const double> batch_y);

/// One bias-corrected Adam update of `model` in place.
void adam_step(MlpRegressor& model, AdamState& state, const ParameterSet& gradients);

/// Called after every optimizer step with (1-based step, mini-batch loss).
using TrainObserver = std::function<void(std::size_t, double)>;

/// Runs exactly config.iterations Adam steps. Each step draws batch_size
/// row indices uniformly with replacement. Initialization uses
/// `stream.child(0)` and batching `stream.child(1)`, so the result is a pure
/// function of (config, data, stream). Throws NonFiniteLoss on divergence.
MlpRegressor train(const MlpConfig& config, const Dataset& data, const RngStream& stream,
                   const TrainObserver& observer = {});

/// Trainer that fits an MlpRegressor; input_dim is taken from the data.
Trainer make_mlp_trainer(MlpConfig config);

}  // namespace kfcp
