#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace kfcp {

/// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  /// Zero-filled rows x cols matrix.
  DenseMatrix(std::size_t rows, std::size_t cols);
  /// Takes ownership of `data`; throws DimensionMismatch if the length is
  /// not rows * cols and InvalidArgument if any entry is non-finite.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  [[nodiscard]] std::span<double> values() noexcept { return data_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }

  /// Largest absolute entry; 0 for an empty matrix.
  [[nodiscard]] double max_abs() const noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Lower-triangular L with L * L^T == a.
///
/// Requires a square matrix symmetric to within 1e-12 (relative to its
/// largest entry). Throws NotPositiveDefiniteError naming the first pivot
/// that is <= 1e-12.
DenseMatrix cholesky_lower(const DenseMatrix& a);

/// a * x; throws DimensionMismatch when a.cols() != x.size().
std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x);

/// Writes a * x into `out` without allocating. Sizes are the caller's duty.
void matvec_into(const DenseMatrix& a, std::span<const double> x, std::span<double> out) noexcept;

}  // namespace kfcp
