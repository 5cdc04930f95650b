#include "kfcp/error.hpp"

namespace kfcp {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::EmptyResiduals: return "EmptyResiduals";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InvalidRho: return "InvalidRho";
    case ErrorCode::MissingBaseline: return "MissingBaseline";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyAfterCleaning: return "EmptyAfterCleaning";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

NotPositiveDefiniteError::NotPositiveDefiniteError(std::size_t pivot_index, double pivot_value)
    : Error(ErrorCode::NotPositiveDefinite,
            "pivot " + std::to_string(pivot_index) + " is " + std::to_string(pivot_value)),
      pivot_index_(pivot_index),
      pivot_value_(pivot_value) {}

}  // namespace kfcp
