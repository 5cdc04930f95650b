#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kfcp/dataset.hpp"
#include "kfcp/regressor.hpp"
#include "kfcp/rng.hpp"

namespace kfcp {

/// Interval construction method: split conformal ("SC") or k-fold ("k<k>").
struct Method {
  enum class Kind { split, kfold };

  Kind kind = Kind::split;
  std::size_t k = 0;

  static Method split() noexcept { return {Kind::split, 0}; }
  static Method kfold(std::size_t k) noexcept { return {Kind::kfold, k}; }

  /// "SC" or "k5" style label.
  [[nodiscard]] std::string name() const;
  /// Accepts "sc"/"SC" and "k<k>" with k >= 2.
  static Method parse(std::string_view text);

  friend auto operator<=>(const Method&, const Method&) = default;
};

/// How residuals become interval offsets.
enum class QuantileMode {
  /// Symmetric: half-width is the conformal quantile of |D|.
  absolute,
  /// Two-sided: [Y-hat + D_(alpha/2), Y-hat + D_(1-alpha/2)] on signed residuals.
  signed_two_sided,
};

/// Which fitted model supplies test-point centers for k-fold intervals.
enum class CenterMode { refit, average };

/// Which model supplies test-point centers for split intervals. refit (the
/// default) predicts with a model fitted on all n rows while the half-width
/// still comes from first-half residuals; first_half is the textbook
/// split-conformal center and gives exact finite-sample validity.
enum class SplitCenter { first_half, refit };

struct ConformalOptions {
  double alpha = 0.1;
  QuantileMode quantile_mode = QuantileMode::absolute;
  CenterMode kfold_center = CenterMode::refit;
  SplitCenter split_center = SplitCenter::refit;

  /// Throws InvalidArgument unless 0 < alpha < 1.
  void validate() const;
};

struct QuantileRank {
  /// 1-based order statistic.
  std::size_t rank = 0;
  /// The uncapped rank exceeded m; finite-sample coverage may fall short.
  bool clipped = false;
};

/// ceil(level * (m + 1)) clipped to [1, m].
QuantileRank conformal_rank(std::size_t m, double level);

/// The conformal_rank(m, level)-th smallest of |residuals|.
/// Throws EmptyResiduals when residuals is empty.
double conformal_quantile(std::span<const double> residuals, double level);

/// The r-th smallest signed residual for r = conformal_rank(m, level) at
/// upper levels and r = max(1, floor(level * (m + 1))) at lower levels
/// (level < 0.5).
double signed_conformal_quantile(std::span<const double> residuals, double level);

/// Out-of-sample residuals D_i = Y_i - Y-hat_i keyed by training index.
struct ResidualSet {
  std::vector<std::size_t> index;
  std::vector<double> residuals;
  std::vector<std::size_t> source_fold;

  [[nodiscard]] std::size_t size() const noexcept { return residuals.size(); }
};

struct PredictionInterval {
  double center = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.1;

  [[nodiscard]] double width() const noexcept { return upper - lower; }
  [[nodiscard]] bool contains(double y) const noexcept { return lower <= y && y <= upper; }
};

struct ConformalModel {
  Method method;
  /// One model for split (trained on the first half), k for k-fold.
  std::vector<RegressorPtr> models;
  /// Full-data model used for centers when the center mode is refit.
  RegressorPtr refit_model;
  CenterMode kfold_center = CenterMode::refit;
  SplitCenter split_center = SplitCenter::refit;
  QuantileMode quantile_mode = QuantileMode::absolute;
  double alpha = 0.1;
  /// Symmetric half-width; (upper_offset - lower_offset) / 2 in signed mode.
  double half_width = 0.0;
  double lower_offset = 0.0;
  double upper_offset = 0.0;
  QuantileRank rank;
  ResidualSet residuals;
  std::size_t input_dim = 0;

  /// Point prediction Y-hat(x) used as the interval center.
  [[nodiscard]] double center(std::span<const double> x) const;
};

/// Shuffles {0..n-1} and cuts it into k folds whose sizes differ by at most
/// one, the first n % k folds taking the extra element. Each fold is sorted.
std::vector<std::vector<std::size_t>> balanced_folds(std::size_t n, std::size_t k,
                                                     RngStream& stream);

/// Split conformal: fit on a random half L1 (ceil(n/2) rows), calibrate on
/// L2. The shuffle uses stream.child(0), the L1 fit stream.child(1), an
/// optional full-data refit stream.child(2).
ConformalModel split_conformal(const Dataset& data, const Trainer& trainer,
                               const ConformalOptions& options, const RngStream& stream);

/// k-fold conformal: out-of-fold residuals for all n rows from k fits, one
/// quantile over all of them. The fold shuffle uses stream.child(0), the
/// full-data refit stream.child(1), fold j stream.child(2 + j).
ConformalModel kfold_conformal(const Dataset& data, const Trainer& trainer, std::size_t k,
                               const ConformalOptions& options, const RngStream& stream);

/// Dispatches on method.kind.
ConformalModel fit_conformal(Method method, const Dataset& data, const Trainer& trainer,
                             const ConformalOptions& options, const RngStream& stream);

/// [center - half_width, center + half_width] (or signed offsets).
PredictionInterval predict_interval(const ConformalModel& model, std::span<const double> x);

}  // namespace kfcp
