#pragma once

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "probekit/error.hpp"
#include "probekit/matrix.hpp"

namespace probekit {

struct RidgeModel {
  Vector weights;
  double intercept = 0.0;
  double alpha = 0.0;

  Vector predict(const Matrix& x) const {
    Vector out = x * weights;
    out.array() += intercept;
    return out;
  }
};

/// `count` values spaced uniformly in log10 between lo and hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, int count) {
  if (count < 1 || !(lo > 0.0) || !(hi >= lo)) throw Error(ErrorCode::InvalidConfig, "log_grid bounds");
  std::vector<double> out(static_cast<std::size_t>(count));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i)
    out[static_cast<std::size_t>(i)] = count == 1 ? lo : std::pow(10.0, a + (b - a) * i / (count - 1));
  return out;
}

/// Default regularization grid: 20 values from 1e-3 to 1e6.
inline std::vector<double> default_alpha_grid() { return log_grid(1e-3, 1e6, 20); }

/// Thin SVD of the (optionally centered) design, shared by every alpha on the grid.
class RidgeSpectrum {
 public:
  RidgeSpectrum(const Matrix& x, const Vector& y, bool fit_intercept) : fit_intercept_(fit_intercept) {
    if (x.rows() != y.size())
      throw Error(ErrorCode::DimensionMismatch, "ridge: X has " + std::to_string(x.rows()) + " rows, y has " +
                                                    std::to_string(y.size()));
    n_ = x.rows();
    x_mean_ = fit_intercept ? Vector(x.colwise().mean().transpose()) : Vector::Zero(x.cols());
    y_mean_ = fit_intercept ? y.mean() : 0.0;
    const Matrix xc = x.rowwise() - x_mean_.transpose();
    yc_ = y.array() - y_mean_;

    Eigen::BDCSVD<Matrix> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    Index rank = 0;
    const double cutoff = s.size() > 0 ? 1e-10 * s(0) : 0.0;
    while (rank < s.size() && s(rank) > cutoff) ++rank;
    s_ = s.head(rank);
    u_ = svd.matrixU().leftCols(rank);
    v_ = svd.matrixV().leftCols(rank);
    uty_ = u_.transpose() * yc_;
    u_sq_ = u_.array().square().matrix();
  }

  RidgeModel model(double alpha) const {
    const Vector coef = (s_.array() / (s_.array().square() + alpha)).matrix().cwiseProduct(uty_);
    RidgeModel m;
    m.weights = v_ * coef;
    m.intercept = y_mean_ - x_mean_.dot(m.weights);
    m.alpha = alpha;
    return m;
  }

  /// Exact leave-one-out residuals y_i - f_{-i}(x_i) via the hat-matrix diagonal.
  Vector loo_residuals(double alpha) const {
    const Vector shrink = s_.array().square() / (s_.array().square() + alpha);
    const Vector fitted = u_ * shrink.cwiseProduct(uty_);
    Vector h = u_sq_ * shrink;
    if (fit_intercept_) h.array() += 1.0 / static_cast<double>(n_);
    Vector out(n_);
    for (Index i = 0; i < n_; ++i) {
      const double denom = 1.0 - h(i);
      out(i) = (yc_(i) - fitted(i)) / (std::abs(denom) < 1e-12 ? 1e-12 : denom);
    }
    return out;
  }

 private:
  bool fit_intercept_;
  Index n_ = 0;
  Vector x_mean_;
  double y_mean_ = 0.0;
  Vector yc_;
  Vector s_;
  Matrix u_;
  Matrix v_;
  Vector uty_;
  Matrix u_sq_;
};

/// Minimizes ||y - Xw - b||^2 + alpha ||w||^2 with the intercept unpenalized.
inline RidgeModel ridge_fit(const Matrix& x, const Vector& y, double alpha, bool fit_intercept = true) {
  if (x.rows() < 2) throw Error(ErrorCode::TooFewRows, "ridge_fit needs at least 2 rows");
  if (!(alpha >= 0.0)) throw Error(ErrorCode::InvalidConfig, "alpha must be non-negative");
  return RidgeSpectrum(x, y, fit_intercept).model(alpha);
}

struct RidgeSelection {
  RidgeModel model;
  std::vector<double> loo_mse;  // parallel to the grid
};

/// Picks alpha by efficient leave-one-out squared error; ties go to the larger alpha.
inline RidgeSelection ridge_cv_path(const Matrix& x, const Vector& y, std::span<const double> grid,
                                    bool fit_intercept = true) {
  if (grid.empty()) throw Error(ErrorCode::InvalidConfig, "empty alpha grid");
  if (!std::is_sorted(grid.begin(), grid.end()) || grid.front() < 0.0)
    throw Error(ErrorCode::InvalidConfig, "alpha grid must be non-negative and ascending");
  if (x.rows() < 3) throw Error(ErrorCode::TooFewRows, "ridge_cv_select needs at least 3 rows");

  const RidgeSpectrum spectrum(x, y, fit_intercept);
  RidgeSelection out;
  out.loo_mse.reserve(grid.size());
  double best = std::numeric_limits<double>::infinity();
  double best_alpha = grid.front();
  for (double alpha : grid) {
    const double mse = spectrum.loo_residuals(alpha).squaredNorm() / static_cast<double>(x.rows());
    out.loo_mse.push_back(mse);
    if (mse <= best) {
      best = mse;
      best_alpha = alpha;
    }
  }
  out.model = spectrum.model(best_alpha);
  return out;
}

inline RidgeModel ridge_cv_select(const Matrix& x, const Vector& y, std::span<const double> grid,
                                  bool fit_intercept = true) {
  return ridge_cv_path(x, y, grid, fit_intercept).model;
}

}  // namespace probekit
