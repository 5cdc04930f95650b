#include "kfcp/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <utility>

#include "kfcp/error.hpp"

namespace kfcp {
namespace {

std::vector<std::size_t> layer_dims(const MlpConfig& config) {
  std::vector<std::size_t> dims;
  dims.reserve(config.hidden_layers.size() + 2);
  dims.push_back(config.input_dim);
  dims.insert(dims.end(), config.hidden_layers.begin(), config.hidden_layers.end());
  dims.push_back(1);
  return dims;
}

inline double activate(Activation a, double z) noexcept {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative expressed through the activation output.
inline double activation_slope(Activation a, double out) noexcept {
  return a == Activation::relu ? (out > 0.0 ? 1.0 : 0.0) : 1.0 - out * out;
}

void check_input(const MlpConfig& config, std::size_t got) {
  if (got != config.input_dim) {
    throw Error(ErrorCode::DimensionMismatch, "network expects " +
                                                  std::to_string(config.input_dim) +
                                                  " inputs, got " + std::to_string(got));
  }
}

// Reusable buffers for mini-batch forward and backward passes.
class Backprop {
 public:
  Backprop(const MlpConfig& config, std::size_t batch)
      : activation_(config.activation), dims_(layer_dims(config)), batch_(batch) {
    acts_.reserve(dims_.size());
    for (std::size_t d : dims_) acts_.emplace_back(batch * d);
    delta_.resize(batch * *std::max_element(dims_.begin(), dims_.end()));
    delta_prev_.resize(delta_.size());
  }

  // Gathers rows[b] of x into the input buffer, runs the pass and writes
  // gradients of the mean squared error into `grads`. Returns the loss.
  double run(const ParameterSet& params, const DenseMatrix& x, std::span<const double> y,
             std::span<const std::size_t> rows, ParameterSet& grads) {
    const std::size_t layers = dims_.size() - 1;
    const std::size_t in_dim = dims_[0];
    for (std::size_t b = 0; b < batch_; ++b) {
      const auto src = x.row(rows[b]);
      std::copy(src.begin(), src.end(), acts_[0].begin() + static_cast<std::ptrdiff_t>(b * in_dim));
    }

    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = dims_[l];
      const std::size_t out = dims_[l + 1];
      const double* w = params.weights[l].values().data();
      const double* bias = params.biases[l].data();
      const bool hidden = l + 1 < layers;
      for (std::size_t b = 0; b < batch_; ++b) {
        const double* a = acts_[l].data() + b * in;
        double* z = acts_[l + 1].data() + b * out;
        for (std::size_t o = 0; o < out; ++o) {
          const double* wr = w + o * in;
          double sum = bias[o];
          for (std::size_t i = 0; i < in; ++i) sum += wr[i] * a[i];
          z[o] = hidden ? activate(activation_, sum) : sum;
        }
      }
    }

    const double* pred = acts_[layers].data();
    double loss = 0.0;
    const double scale = 2.0 / static_cast<double>(batch_);
    for (std::size_t b = 0; b < batch_; ++b) {
      const double r = pred[b] - y[rows[b]];
      loss += r * r;
      delta_[b] = scale * r;
    }
    loss /= static_cast<double>(batch_);

    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = dims_[l];
      const std::size_t out = dims_[l + 1];
      double* gw = grads.weights[l].values().data();
      double* gb = grads.biases[l].data();
      std::fill(gw, gw + in * out, 0.0);
      std::fill(gb, gb + out, 0.0);
      for (std::size_t b = 0; b < batch_; ++b) {
        const double* a = acts_[l].data() + b * in;
        const double* d = delta_.data() + b * out;
        for (std::size_t o = 0; o < out; ++o) {
          const double dv = d[o];
          gb[o] += dv;
          if (dv == 0.0) continue;
          double* gr = gw + o * in;
          for (std::size_t i = 0; i < in; ++i) gr[i] += dv * a[i];
        }
      }
      if (l == 0) break;

      const double* w = params.weights[l].values().data();
      for (std::size_t b = 0; b < batch_; ++b) {
        const double* d = delta_.data() + b * out;
        const double* a = acts_[l].data() + b * in;
        double* dp = delta_prev_.data() + b * in;
        std::fill(dp, dp + in, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
          const double dv = d[o];
          if (dv == 0.0) continue;
          const double* wr = w + o * in;
          for (std::size_t i = 0; i < in; ++i) dp[i] += wr[i] * dv;
        }
        for (std::size_t i = 0; i < in; ++i) dp[i] *= activation_slope(activation_, a[i]);
      }
      std::swap(delta_, delta_prev_);
    }
    return loss;
  }

 private:
  Activation activation_;
  std::vector<std::size_t> dims_;
  std::size_t batch_;
  std::vector<std::vector<double>> acts_;
  std::vector<double> delta_;
  std::vector<double> delta_prev_;
};

}  // namespace

std::string_view to_string(Activation activation) noexcept {
  return activation == Activation::relu ? "relu" : "tanh";
}

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::relu;
  if (text == "tanh") return Activation::tanh;
  throw Error(ErrorCode::InvalidArgument, "unknown activation '" + std::string(text) + "'");
}

void MlpConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (input_dim == 0) fail("input_dim must be positive");
  if (hidden_layers.empty()) fail("hidden_layers must be nonempty");
  for (std::size_t w : hidden_layers) {
    if (w == 0) fail("hidden layer widths must be positive");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (batch_size == 0) fail("batch_size must be at least 1");
  if (iterations == 0) fail("iterations must be at least 1");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must lie in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must lie in (0, 1)");
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be > 0");
}

MlpConfig MlpConfig::simulation_defaults(std::size_t input_dim) {
  MlpConfig c;
  c.input_dim = input_dim;
  c.hidden_layers = {15, 15};
  c.batch_size = 32;
  c.iterations = 20000;
  return c;
}

MlpConfig MlpConfig::real_data_defaults(std::size_t input_dim) {
  MlpConfig c;
  c.input_dim = input_dim;
  c.hidden_layers = {10, 10};
  c.batch_size = 16;
  c.iterations = 25000;
  return c;
}

ParameterSet ParameterSet::zeros(const MlpConfig& config) {
  const auto dims = layer_dims(config);
  ParameterSet p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    p.weights.emplace_back(dims[l + 1], dims[l]);
    p.biases.emplace_back(dims[l + 1], 0.0);
  }
  return p;
}

std::size_t ParameterSet::count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].values().size() + biases[l].size();
  return n;
}

bool ParameterSet::same_shape(const ParameterSet& other) const noexcept {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() ||
        weights[l].cols() != other.weights[l].cols() ||
        biases[l].size() != other.biases[l].size()) {
      return false;
    }
  }
  return true;
}

bool ParameterSet::all_finite() const noexcept {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (double v : weights[l].values()) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : biases[l]) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

MlpRegressor::MlpRegressor(MlpConfig config)
    : config_(std::move(config)), params_(ParameterSet::zeros(config_)) {
  config_.validate();
}

MlpRegressor::MlpRegressor(MlpConfig config, ParameterSet parameters, bool trained)
    : config_(std::move(config)), params_(std::move(parameters)), trained_(trained) {
  config_.validate();
  if (!params_.same_shape(ParameterSet::zeros(config_))) {
    throw Error(ErrorCode::DimensionMismatch, "parameters do not match the network layout");
  }
}

double MlpRegressor::predict(std::span<const double> x) const {
  check_input(config_, x.size());
  std::vector<double> current(x.begin(), x.end());
  std::vector<double> next;
  const std::size_t layers = params_.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& w = params_.weights[l];
    next.resize(w.rows());
    matvec_into(w, current, next);
    const bool hidden = l + 1 < layers;
    for (std::size_t o = 0; o < next.size(); ++o) {
      next[o] += params_.biases[l][o];
      if (hidden) next[o] = activate(config_.activation, next[o]);
    }
    std::swap(current, next);
  }
  return current[0];
}

AdamState AdamState::zeros(const MlpConfig& config) {
  return AdamState{ParameterSet::zeros(config), ParameterSet::zeros(config), 0};
}

MlpRegressor xavier_init(const MlpConfig& config, RngStream& stream) {
  MlpRegressor model(config);
  for (auto& w : model.parameters().weights) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& v : w.values()) v = stream.uniform(-bound, bound);
  }
  return model;
}

double forward(const MlpRegressor& model, std::span<const double> x) { return model.predict(x); }

LossAndGradients mse_loss_and_gradients(const MlpRegressor& model, const DenseMatrix& batch_x,
                                        std::span<const double> batch_y) {
  if (batch_y.empty()) throw Error(ErrorCode::InvalidArgument, "batch must be nonempty");
  if (batch_x.rows() != batch_y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "batch predictors and responses differ in length");
  }
  check_input(model.config(), batch_x.cols());

  std::vector<std::size_t> rows(batch_y.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  LossAndGradients out{0.0, ParameterSet::zeros(model.config())};
  Backprop pass(model.config(), rows.size());
  out.loss = pass.run(model.parameters(), batch_x, batch_y, rows, out.gradients);
  return out;
}

void adam_step(MlpRegressor& model, AdamState& state, const ParameterSet& gradients) {
  auto& params = model.parameters();
  if (!params.same_shape(gradients) || !params.same_shape(state.first_moment) ||
      !params.same_shape(state.second_moment)) {
    throw Error(ErrorCode::DimensionMismatch, "adam state is not congruent with the model");
  }
  const auto& cfg = model.config();
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.adam_beta2, t);
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;

  auto update = [&](std::span<double> theta, std::span<const double> g, std::span<double> m,
                    std::span<double> v) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
    }
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l].values(), gradients.weights[l].values(),
           state.first_moment.weights[l].values(), state.second_moment.weights[l].values());
    update(params.biases[l], gradients.biases[l], state.first_moment.biases[l],
           state.second_moment.biases[l]);
  }
}

MlpRegressor train(const MlpConfig& config, const Dataset& data, const RngStream& stream,
                   const TrainObserver& observer) {
  config.validate();
  if (data.size() == 0) throw Error(ErrorCode::InsufficientData, "cannot train on an empty dataset");
  if (data.x.rows() != data.size()) {
    throw Error(ErrorCode::DimensionMismatch, "dataset rows and responses differ in length");
  }
  check_input(config, data.dim());

  RngStream init_stream = stream.child(0);
  RngStream batch_stream = stream.child(1);
  MlpRegressor model = xavier_init(config, init_stream);
  AdamState state = AdamState::zeros(config);
  ParameterSet grads = ParameterSet::zeros(config);
  Backprop pass(config, config.batch_size);
  std::vector<std::size_t> rows(config.batch_size);

  for (std::size_t step = 1; step <= config.iterations; ++step) {
    for (auto& r : rows) r = batch_stream.uniform_index(data.size());
    const double loss = pass.run(model.parameters(), data.x, data.y, rows, grads);
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::NonFiniteLoss,
                  "mini-batch loss became " + std::to_string(loss) + " at step " +
                      std::to_string(step) + " of " + std::to_string(config.iterations));
    }
    adam_step(model, state, grads);
    if (observer) observer(step, loss);
  }
  if (!model.parameters().all_finite()) {
    throw Error(ErrorCode::NonFiniteLoss, "parameters are non-finite after training");
  }
  model.mark_trained();
  return model;
}

Trainer make_mlp_trainer(MlpConfig config) {
  return [config = std::move(config)](const Dataset& data, RngStream& stream) -> RegressorPtr {
    MlpConfig c = config;
    c.input_dim = data.dim();
    return std::make_shared<MlpRegressor>(train(c, data, stream));
  };
}

}  // namespace kfcp
