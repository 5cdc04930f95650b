#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kfcp {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NotSymmetric,
  NotPositiveDefinite,
  EmptyResiduals,
  InsufficientData,
  NonFiniteLoss,
  InvalidRho,
  MissingBaseline,
  FileNotFound,
  ParseError,
  EmptyAfterCleaning,
  IoError,
  EmptyGroup,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library. The code lets
/// callers (the harness retry rule, the CLI exit policy) branch on kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class NotPositiveDefiniteError : public Error {
 public:
  NotPositiveDefiniteError(std::size_t pivot_index, double pivot_value);

  [[nodiscard]] std::size_t pivot_index() const noexcept { return pivot_index_; }
  [[nodiscard]] double pivot_value() const noexcept { return pivot_value_; }

 private:
  std::size_t pivot_index_;
  double pivot_value_;
};

}  // namespace kfcp
