#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kfcp/dataset.hpp"
#include "kfcp/linalg.hpp"
#include "kfcp/rng.hpp"

namespace kfcp {

enum class MeanFunction { linear, nonlinear, nonlinear_interaction };
enum class ErrorDistribution { homoscedastic, heavy_tailed, heteroscedastic };

/// Whether the heteroscedastic N(0, s(X)) parameter is a variance (default)
/// or a standard deviation.
enum class HeteroscedasticReading { variance, standard_deviation };

std::string_view to_string(MeanFunction f) noexcept;
std::string_view to_string(ErrorDistribution d) noexcept;
MeanFunction parse_mean_function(std::string_view text);
ErrorDistribution parse_error_distribution(std::string_view text);

/// One cell of the factorial design.
struct ScenarioSpec {
  MeanFunction mean_fn = MeanFunction::linear;
  ErrorDistribution error_dist = ErrorDistribution::homoscedastic;
  std::size_t n_train = 500;
  std::size_t p = 10;
  double rho = 0.6;
  std::size_t n_test = 500;
  std::size_t replicates = 50;
  HeteroscedasticReading het_reading = HeteroscedasticReading::variance;

  /// Throws InvalidArgument / InvalidRho on out-of-range fields.
  void validate() const;

  /// "linear_homoscedastic_500"; used in result tables and file names.
  [[nodiscard]] std::string id() const;

  /// Parses "mean:error:n_train", e.g. "linear:homoscedastic:500"; the
  /// remaining fields keep their defaults.
  static ScenarioSpec parse(std::string_view text);

  /// The 27 cells: 3 mean functions x 3 error laws x n in {500, 2500, 5000}.
  static std::vector<ScenarioSpec> paper_grid();

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

/// Sigma[i][j] = rho^|i-j|; throws InvalidRho unless |rho| < 1.
DenseMatrix ar1_covariance(std::size_t p, double rho);

/// m1 = x1 + x2, m2 = 2 exp(-|x1| - |x2|), m3 = m2 + x1 x2.
/// Throws DimensionMismatch when x has fewer than two entries.
double mean_value(MeanFunction f, std::span<const double> x);

/// Monte Carlo estimate of E|m(X)| with X ~ N(0, AR1(p, rho)).
/// mc_samples must be at least 10^4.
double estimate_abs_mean(const std::function<double(std::span<const double>)>& m, std::size_t p,
                         double rho, RngStream& stream, std::size_t mc_samples);
double estimate_abs_mean(MeanFunction f, std::size_t p, double rho, RngStream& stream,
                         std::size_t mc_samples = 1'000'000);

/// The dedicated stream for the E|m(X)| estimate of (f, p, rho).
RngStream abs_mean_stream(std::uint64_t master_seed, MeanFunction f, std::size_t p, double rho);

/// Standard deviation of the heteroscedastic error at mean value `m`.
double heteroscedastic_sd(double m, double abs_mean, HeteroscedasticReading reading) noexcept;

struct SimulatedData {
  Dataset train;
  Dataset test;
};

/// Draws (train, test) pairs for one scenario. Holds the Cholesky factor of
/// the AR(1) covariance and the E|m(X)| normalizer.
class ScenarioGenerator {
 public:
  /// abs_mean is only consulted for heteroscedastic errors.
  ScenarioGenerator(ScenarioSpec spec, double abs_mean);

  [[nodiscard]] const ScenarioSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const DenseMatrix& cholesky_factor() const noexcept { return chol_; }
  [[nodiscard]] double abs_mean() const noexcept { return abs_mean_; }

  /// Train rows come from stream.child(0), test rows from stream.child(1).
  [[nodiscard]] SimulatedData generate(const RngStream& stream) const;

  /// `rows` draws of Y = m(X) + eps.
  [[nodiscard]] Dataset draw(std::size_t rows, RngStream& stream) const;

  /// One error draw given the mean value at X.
  [[nodiscard]] double draw_error(double m, RngStream& stream) const;

 private:
  ScenarioSpec spec_;
  DenseMatrix chol_;
  double abs_mean_;
};

/// Convenience over ScenarioGenerator for one replicate.
SimulatedData generate_dataset(const ScenarioSpec& spec, double abs_mean, const RngStream& stream);

}  // namespace kfcp
