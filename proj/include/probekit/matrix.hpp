#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "probekit/error.hpp"

namespace probekit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using RowSet = std::vector<Index>;

/// Throws NonFiniteError at the first NaN/inf cell in row-major scan order.
inline void require_finite(const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      if (!std::isfinite(m(r, c))) throw NonFiniteError(r, c);
}

inline Matrix select_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

inline Vector select_rows(const Vector& v, std::span<const Index> rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(rows[i]);
  return out;
}

/// Prepends a column of ones.
inline Matrix with_intercept(const Matrix& z) {
  Matrix a(z.rows(), z.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(z.cols()) = z;
  return a;
}

inline Matrix center_columns(const Matrix& m) {
  return m.rowwise() - m.colwise().mean();
}

/// Population variance (divide by n).
inline double variance(const Vector& v) {
  if (v.size() == 0) return 0.0;
  return (v.array() - v.mean()).square().mean();
}

inline std::vector<double> to_std(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

inline Vector from_std(std::span<const double> v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace probekit
