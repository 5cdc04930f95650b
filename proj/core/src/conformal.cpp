#include "kfcp/conformal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "kfcp/error.hpp"

namespace kfcp {
namespace {

// Absorbs rounding in level * (m + 1) so that e.g. 0.9 * 10 maps to rank 9.
constexpr double kRankSlack = 1e-9;

std::size_t lower_rank(std::size_t m, double level) {
  const double raw = std::floor(level * static_cast<double>(m + 1) + kRankSlack);
  return std::clamp<std::size_t>(raw < 1.0 ? 1 : static_cast<std::size_t>(raw), 1, m);
}

double kth_smallest(std::vector<double> values, std::size_t rank) {
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

void check_fit_inputs(const Dataset& data, const ConformalOptions& options, std::size_t min_n) {
  options.validate();
  data.validate();
  if (data.size() < min_n) {
    throw Error(ErrorCode::InsufficientData, "need at least " + std::to_string(min_n) +
                                                 " observations, got " +
                                                 std::to_string(data.size()));
  }
}

void set_offsets(ConformalModel& model) {
  const auto& r = model.residuals.residuals;
  if (model.quantile_mode == QuantileMode::absolute) {
    model.rank = conformal_rank(r.size(), 1.0 - model.alpha);
    model.half_width = conformal_quantile(r, 1.0 - model.alpha);
    model.lower_offset = -model.half_width;
    model.upper_offset = model.half_width;
  } else {
    model.rank = conformal_rank(r.size(), 1.0 - model.alpha / 2.0);
    model.lower_offset = signed_conformal_quantile(r, model.alpha / 2.0);
    model.upper_offset = signed_conformal_quantile(r, 1.0 - model.alpha / 2.0);
    model.half_width = 0.5 * (model.upper_offset - model.lower_offset);
  }
}

RegressorPtr fit(const Trainer& trainer, const Dataset& data, RngStream stream) {
  RegressorPtr model = trainer(data, stream);
  if (!model) throw Error(ErrorCode::InvalidArgument, "trainer returned no model");
  return model;
}

}  // namespace

std::string Method::name() const {
  return kind == Kind::split ? std::string("SC") : "k" + std::to_string(k);
}

Method Method::parse(std::string_view text) {
  if (text == "sc" || text == "SC") return split();
  if (text.size() >= 2 && (text[0] == 'k' || text[0] == 'K')) {
    std::size_t k = 0;
    const auto* first = text.data() + 1;
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, k);
    if (ec == std::errc() && ptr == last && k >= 2) return kfold(k);
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown method '" + std::string(text) + "' (expected sc or k<k>=2>)");
}

void ConformalOptions::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

QuantileRank conformal_rank(std::size_t m, double level) {
  if (m == 0) throw Error(ErrorCode::EmptyResiduals, "no residuals");
  const double raw = std::ceil(level * static_cast<double>(m + 1) - kRankSlack);
  if (raw > static_cast<double>(m)) return {m, true};
  return {raw < 1.0 ? std::size_t{1} : static_cast<std::size_t>(raw), false};
}

double conformal_quantile(std::span<const double> residuals, double level) {
  if (residuals.empty()) throw Error(ErrorCode::EmptyResiduals, "no residuals");
  std::vector<double> abs_values(residuals.size());
  std::transform(residuals.begin(), residuals.end(), abs_values.begin(),
                 [](double d) { return std::abs(d); });
  return kth_smallest(std::move(abs_values), conformal_rank(residuals.size(), level).rank);
}

double signed_conformal_quantile(std::span<const double> residuals, double level) {
  if (residuals.empty()) throw Error(ErrorCode::EmptyResiduals, "no residuals");
  const std::size_t m = residuals.size();
  const std::size_t rank = level < 0.5 ? lower_rank(m, level) : conformal_rank(m, level).rank;
  return kth_smallest(std::vector<double>(residuals.begin(), residuals.end()), rank);
}

double ConformalModel::center(std::span<const double> x) const {
  if (x.size() != input_dim) {
    throw Error(ErrorCode::DimensionMismatch, "interval model expects " +
                                                  std::to_string(input_dim) + " predictors, got " +
                                                  std::to_string(x.size()));
  }
  const bool use_refit = method.kind == Method::Kind::split
                             ? split_center == SplitCenter::refit
                             : kfold_center == CenterMode::refit;
  if (use_refit) return refit_model->predict(x);
  if (method.kind == Method::Kind::split) return models.front()->predict(x);
  double sum = 0.0;
  for (const auto& m : models) sum += m->predict(x);
  return sum / static_cast<double>(models.size());
}

std::vector<std::vector<std::size_t>> balanced_folds(std::size_t n, std::size_t k,
                                                     RngStream& stream) {
  if (k == 0 || k > n) {
    throw Error(ErrorCode::InvalidArgument,
                "cannot cut " + std::to_string(n) + " rows into " + std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  stream.shuffle(order);

  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t pos = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t len = base + (j < extra ? 1 : 0);
    folds[j].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    std::sort(folds[j].begin(), folds[j].end());
    pos += len;
  }
  return folds;
}

ConformalModel split_conformal(const Dataset& data, const Trainer& trainer,
                               const ConformalOptions& options, const RngStream& stream) {
  check_fit_inputs(data, options, 4);
  const std::size_t n = data.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream shuffle_stream = stream.child(0);
  shuffle_stream.shuffle(order);
  const std::size_t n_fit = (n + 1) / 2;
  std::vector<std::size_t> fit_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_fit));
  std::vector<std::size_t> calib_rows(order.begin() + static_cast<std::ptrdiff_t>(n_fit), order.end());
  std::sort(fit_rows.begin(), fit_rows.end());
  std::sort(calib_rows.begin(), calib_rows.end());

  ConformalModel model;
  model.method = Method::split();
  model.alpha = options.alpha;
  model.quantile_mode = options.quantile_mode;
  model.kfold_center = options.kfold_center;
  model.split_center = options.split_center;
  model.input_dim = data.dim();
  model.models.push_back(fit(trainer, data.subset(fit_rows), stream.child(1)));

  auto& res = model.residuals;
  res.index = calib_rows;
  res.residuals.reserve(calib_rows.size());
  res.source_fold.assign(calib_rows.size(), 1);
  for (std::size_t i : calib_rows) {
    res.residuals.push_back(data.y[i] - model.models[0]->predict(data.x.row(i)));
  }
  set_offsets(model);

  if (options.split_center == SplitCenter::refit) {
    model.refit_model = fit(trainer, data, stream.child(2));
  }
  return model;
}

ConformalModel kfold_conformal(const Dataset& data, const Trainer& trainer, std::size_t k,
                               const ConformalOptions& options, const RngStream& stream) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "k-fold conformal requires k >= 2");
  check_fit_inputs(data, options, 2 * k);
  const std::size_t n = data.size();

  RngStream fold_stream = stream.child(0);
  const auto folds = balanced_folds(n, k, fold_stream);

  ConformalModel model;
  model.method = Method::kfold(k);
  model.alpha = options.alpha;
  model.quantile_mode = options.quantile_mode;
  model.kfold_center = options.kfold_center;
  model.split_center = options.split_center;
  model.input_dim = data.dim();

  auto& res = model.residuals;
  res.index.resize(n);
  std::iota(res.index.begin(), res.index.end(), std::size_t{0});
  res.residuals.assign(n, 0.0);
  res.source_fold.assign(n, k);

  std::vector<std::size_t> train_rows;
  train_rows.reserve(n);
  for (std::size_t j = 0; j < k; ++j) {
    train_rows.clear();
    for (std::size_t r = 0; r < k; ++r) {
      if (r != j) train_rows.insert(train_rows.end(), folds[r].begin(), folds[r].end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    RegressorPtr fold_model = fit(trainer, data.subset(train_rows), stream.child(2 + j));
    for (std::size_t i : folds[j]) {
      res.residuals[i] = data.y[i] - fold_model->predict(data.x.row(i));
      res.source_fold[i] = j;
    }
    model.models.push_back(std::move(fold_model));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (res.source_fold[i] == k) {
      throw Error(ErrorCode::InvalidArgument, "fold partition missed row " + std::to_string(i));
    }
  }
  set_offsets(model);

  if (options.kfold_center == CenterMode::refit) {
    model.refit_model = fit(trainer, data, stream.child(1));
  }
  return model;
}

ConformalModel fit_conformal(Method method, const Dataset& data, const Trainer& trainer,
                             const ConformalOptions& options, const RngStream& stream) {
  if (method.kind == Method::Kind::split) return split_conformal(data, trainer, options, stream);
  return kfold_conformal(data, trainer, method.k, options, stream);
}

PredictionInterval predict_interval(const ConformalModel& model, std::span<const double> x) {
  const double c = model.center(x);
  return PredictionInterval{c, c + model.lower_offset, c + model.upper_offset, model.alpha};
}

}  // namespace kfcp
