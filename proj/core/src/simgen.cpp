#include "kfcp/simgen.hpp"

#include <bit>
#include <charconv>
#include <cmath>

#include "kfcp/error.hpp"

namespace kfcp {
namespace {

constexpr std::uint64_t kAbsMeanTag = 0xAB5'0000'0001ULL;

std::size_t parse_size(std::string_view text, std::string_view what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

std::string_view to_string(MeanFunction f) noexcept {
  switch (f) {
    case MeanFunction::linear: return "linear";
    case MeanFunction::nonlinear: return "nonlinear";
    case MeanFunction::nonlinear_interaction: return "nonlinear_interaction";
  }
  return "?";
}

std::string_view to_string(ErrorDistribution d) noexcept {
  switch (d) {
    case ErrorDistribution::homoscedastic: return "homoscedastic";
    case ErrorDistribution::heavy_tailed: return "heavy_tailed";
    case ErrorDistribution::heteroscedastic: return "heteroscedastic";
  }
  return "?";
}

MeanFunction parse_mean_function(std::string_view text) {
  if (text == "linear" || text == "m1") return MeanFunction::linear;
  if (text == "nonlinear" || text == "m2") return MeanFunction::nonlinear;
  if (text == "nonlinear_interaction" || text == "interaction" || text == "m3") {
    return MeanFunction::nonlinear_interaction;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown mean function '" + std::string(text) + "'");
}

ErrorDistribution parse_error_distribution(std::string_view text) {
  if (text == "homoscedastic" || text == "normal") return ErrorDistribution::homoscedastic;
  if (text == "heavy_tailed" || text == "heavy" || text == "t3") return ErrorDistribution::heavy_tailed;
  if (text == "heteroscedastic" || text == "hetero") return ErrorDistribution::heteroscedastic;
  throw Error(ErrorCode::InvalidArgument, "unknown error distribution '" + std::string(text) + "'");
}

void ScenarioSpec::validate() const {
  if (!(std::abs(rho) < 1.0)) throw Error(ErrorCode::InvalidRho, "|rho| must be < 1");
  if (p < 2) throw Error(ErrorCode::InvalidArgument, "p must be at least 2");
  if (n_train == 0) throw Error(ErrorCode::InvalidArgument, "n_train must be positive");
  if (n_test == 0) throw Error(ErrorCode::InvalidArgument, "n_test must be positive");
  if (replicates == 0) throw Error(ErrorCode::InvalidArgument, "replicates must be positive");
}

std::string ScenarioSpec::id() const {
  return std::string(to_string(mean_fn)) + "_" + std::string(to_string(error_dist)) + "_" +
         std::to_string(n_train);
}

ScenarioSpec ScenarioSpec::parse(std::string_view text) {
  const auto first = text.find(':');
  const auto second = first == std::string_view::npos ? first : text.find(':', first + 1);
  if (second == std::string_view::npos || text.find(':', second + 1) != std::string_view::npos) {
    throw Error(ErrorCode::InvalidArgument,
                "scenario '" + std::string(text) + "' must look like mean:error:n");
  }
  ScenarioSpec spec;
  spec.mean_fn = parse_mean_function(text.substr(0, first));
  spec.error_dist = parse_error_distribution(text.substr(first + 1, second - first - 1));
  spec.n_train = parse_size(text.substr(second + 1), "training size");
  spec.validate();
  return spec;
}

std::vector<ScenarioSpec> ScenarioSpec::paper_grid() {
  std::vector<ScenarioSpec> grid;
  for (auto f : {MeanFunction::linear, MeanFunction::nonlinear, MeanFunction::nonlinear_interaction}) {
    for (auto d : {ErrorDistribution::homoscedastic, ErrorDistribution::heavy_tailed,
                   ErrorDistribution::heteroscedastic}) {
      for (std::size_t n : {500, 2500, 5000}) {
        ScenarioSpec s;
        s.mean_fn = f;
        s.error_dist = d;
        s.n_train = n;
        grid.push_back(s);
      }
    }
  }
  return grid;
}

DenseMatrix ar1_covariance(std::size_t p, double rho) {
  if (!(std::abs(rho) < 1.0)) {
    throw Error(ErrorCode::InvalidRho, "AR(1) needs |rho| < 1, got " + std::to_string(rho));
  }
  DenseMatrix sigma(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const auto lag = static_cast<int>(i > j ? i - j : j - i);
      sigma(i, j) = lag == 0 ? 1.0 : std::pow(rho, lag);
    }
  }
  return sigma;
}

double mean_value(MeanFunction f, std::span<const double> x) {
  if (x.size() < 2) throw Error(ErrorCode::DimensionMismatch, "mean functions need x1 and x2");
  const double x1 = x[0];
  const double x2 = x[1];
  switch (f) {
    case MeanFunction::linear: return x1 + x2;
    case MeanFunction::nonlinear: return 2.0 * std::exp(-std::abs(x1) - std::abs(x2));
    case MeanFunction::nonlinear_interaction:
      return 2.0 * std::exp(-std::abs(x1) - std::abs(x2)) + x1 * x2;
  }
  return 0.0;
}

double estimate_abs_mean(const std::function<double(std::span<const double>)>& m, std::size_t p,
                         double rho, RngStream& stream, std::size_t mc_samples) {
  if (mc_samples < 10'000) {
    throw Error(ErrorCode::InvalidArgument, "E|m(X)| estimate needs at least 10^4 samples");
  }
  const DenseMatrix chol = cholesky_lower(ar1_covariance(p, rho));
  std::vector<double> z(p);
  std::vector<double> x(p);
  double sum = 0.0;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    for (auto& v : z) v = stream.std_normal();
    matvec_into(chol, z, x);
    sum += std::abs(m(x));
  }
  return sum / static_cast<double>(mc_samples);
}

double estimate_abs_mean(MeanFunction f, std::size_t p, double rho, RngStream& stream,
                         std::size_t mc_samples) {
  return estimate_abs_mean([f](std::span<const double> x) { return mean_value(f, x); }, p, rho,
                           stream, mc_samples);
}

RngStream abs_mean_stream(std::uint64_t master_seed, MeanFunction f, std::size_t p, double rho) {
  return derive_stream(master_seed, {kAbsMeanTag, static_cast<std::uint64_t>(f),
                                     static_cast<std::uint64_t>(p),
                                     std::bit_cast<std::uint64_t>(rho)});
}

double heteroscedastic_sd(double m, double abs_mean, HeteroscedasticReading reading) noexcept {
  const double s = 0.5 + 0.5 * std::abs(m) / abs_mean;
  return reading == HeteroscedasticReading::variance ? std::sqrt(s) : s;
}

ScenarioGenerator::ScenarioGenerator(ScenarioSpec spec, double abs_mean)
    : spec_(spec), chol_(cholesky_lower(ar1_covariance(spec.p, spec.rho))), abs_mean_(abs_mean) {
  spec_.validate();
  if (spec_.error_dist == ErrorDistribution::heteroscedastic && !(abs_mean > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "heteroscedastic errors need E|m(X)| > 0");
  }
}

double ScenarioGenerator::draw_error(double m, RngStream& stream) const {
  switch (spec_.error_dist) {
    case ErrorDistribution::homoscedastic: return stream.std_normal();
    case ErrorDistribution::heavy_tailed: return stream.scaled_t3();
    case ErrorDistribution::heteroscedastic:
      return heteroscedastic_sd(m, abs_mean_, spec_.het_reading) * stream.std_normal();
  }
  return 0.0;
}

Dataset ScenarioGenerator::draw(std::size_t rows, RngStream& stream) const {
  Dataset out{DenseMatrix(rows, spec_.p), std::vector<double>(rows)};
  std::vector<double> z(spec_.p);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& v : z) v = stream.std_normal();
    auto x = out.x.row(r);
    matvec_into(chol_, z, x);
    const double m = mean_value(spec_.mean_fn, x);
    out.y[r] = m + draw_error(m, stream);
  }
  return out;
}

SimulatedData ScenarioGenerator::generate(const RngStream& stream) const {
  RngStream train_stream = stream.child(0);
  RngStream test_stream = stream.child(1);
  SimulatedData data;
  data.train = draw(spec_.n_train, train_stream);
  data.test = draw(spec_.n_test, test_stream);
  return data;
}

SimulatedData generate_dataset(const ScenarioSpec& spec, double abs_mean, const RngStream& stream) {
  return ScenarioGenerator(spec, abs_mean).generate(stream);
}

}  // namespace kfcp
