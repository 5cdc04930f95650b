#include "kfcp/dataset.hpp"

#include <cmath>
#include <string>

#include "kfcp/error.hpp"

namespace kfcp {

void Dataset::validate() const {
  if (x.rows() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "dataset has " + std::to_string(x.rows()) +
                                                  " predictor rows but " +
                                                  std::to_string(y.size()) + " responses");
  }
  if (y.size() < 2) throw Error(ErrorCode::InsufficientData, "dataset needs at least 2 rows");
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite predictor value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite response value");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out{DenseMatrix(indices.size(), x.cols()), std::vector<double>(indices.size())};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = x.row(indices[i]);
    auto dst = out.x.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    out.y[i] = y[indices[i]];
  }
  return out;
}

}  // namespace kfcp
