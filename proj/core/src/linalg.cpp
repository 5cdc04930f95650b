#include "kfcp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kfcp/error.hpp"

namespace kfcp {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::DimensionMismatch,
                "matrix data has " + std::to_string(data_.size()) + " entries, expected " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "matrix entries must be finite");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorCode::DimensionMismatch, "ragged row list");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

double DenseMatrix::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

DenseMatrix cholesky_lower(const DenseMatrix& a) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "cholesky requires a square matrix");
  }
  const std::size_t n = a.rows();
  const double scale = std::max(a.max_abs(), 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > 1e-12 * scale) {
        throw Error(ErrorCode::NotSymmetric, "entry (" + std::to_string(i) + ", " +
                                                 std::to_string(j) + ") breaks symmetry");
      }
    }
  }

  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 1e-12)) throw NotPositiveDefiniteError(j, diag);
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double sum = a(i, j);
      for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
      l(i, j) = sum / ljj;
    }
  }
  return l;
}

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw Error(ErrorCode::DimensionMismatch, "matvec: matrix has " + std::to_string(a.cols()) +
                                                  " columns, vector has " +
                                                  std::to_string(x.size()) + " entries");
  }
  std::vector<double> out(a.rows());
  matvec_into(a, x, out);
  return out;
}

void matvec_into(const DenseMatrix& a, std::span<const double> x, std::span<double> out) noexcept {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    double sum = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) sum += row[c] * x[c];
    out[r] = sum;
  }
}

}  // namespace kfcp
