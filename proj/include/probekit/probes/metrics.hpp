#pragma once

#include "probekit/error.hpp"
#include "probekit/matrix.hpp"

namespace probekit {

/// Coefficient of determination, 1 - SS_res / SS_tot. Negative when worse than the mean.
inline double r2_score(const Vector& y, const Vector& y_hat) {
  if (y.size() != y_hat.size())
    throw Error(ErrorCode::DimensionMismatch, "r2_score: " + std::to_string(y.size()) + " targets vs " +
                                                  std::to_string(y_hat.size()) + " predictions");
  const double mean = y.mean();
  const double ss_tot = (y.array() - mean).square().sum();
  if (!(ss_tot > 0.0)) throw Error(ErrorCode::ZeroVarianceTarget, "r2_score needs Var(y) > 0");
  const double ss_res = (y - y_hat).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

inline double mean_squared_error(const Vector& y, const Vector& y_hat) {
  if (y.size() != y_hat.size()) throw Error(ErrorCode::DimensionMismatch, "mean_squared_error");
  return (y - y_hat).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace probekit
