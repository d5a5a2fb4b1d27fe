#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "probekit/error.hpp"
#include "probekit/matrix.hpp"

namespace probekit {

/// 1-based ranks with ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "pearson");
  const Vector x = from_std(a);
  const Vector y = from_std(b);
  const Vector xc = x.array() - x.mean();
  const Vector yc = y.array() - y.mean();
  const double denom = std::sqrt(xc.squaredNorm() * yc.squaredNorm());
  if (!(denom > 0.0)) throw Error(ErrorCode::ConstantInput, "correlation of a constant sequence");
  return std::clamp(xc.dot(yc) / denom, -1.0, 1.0);
}

inline double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.size() < 2) throw Error(ErrorCode::LengthMismatch, "spearman_rho needs at least 2 values");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double w_plus = 0.0;
  double p_value = 1.0;    // two-sided
  std::size_t n = 0;       // non-zero differences used
  bool exact = false;
};

/// Paired Wilcoxon signed-rank test. Zero differences are dropped; exact null
/// distribution for n <= 25, normal approximation with tie and continuity corrections above.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "wilcoxon_signed_rank");
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) diff.push_back(a[i] - b[i]);
  if (diff.empty()) throw Error(ErrorCode::AllZeroDifferences, "every paired difference is zero");
  if (diff.size() < 5)
    throw Error(ErrorCode::TooFewRows, "wilcoxon needs at least 5 non-zero differences, got " + std::to_string(diff.size()));

  std::vector<double> mag(diff.size());
  std::transform(diff.begin(), diff.end(), mag.begin(), [](double d) { return std::abs(d); });
  const auto ranks = average_ranks(mag);

  WilcoxonResult out;
  out.n = diff.size();
  double total = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    total += ranks[i];
    if (diff[i] > 0) out.w_plus += ranks[i];
  }
  out.statistic = std::min(out.w_plus, total - out.w_plus);

  const std::size_t n = diff.size();
  if (n <= 25) {
    // Doubled ranks are integers even with averaged ties; count sign assignments by sum.
    std::vector<int> twice(n);
    int max_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      twice[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      max_sum += twice[i];
    }
    std::vector<double> count(static_cast<std::size_t>(max_sum) + 1, 0.0);
    count[0] = 1.0;
    for (int r : twice)
      for (int s = max_sum; s >= r; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];
    const int observed = static_cast<int>(std::lround(2.0 * out.w_plus));
    double lower = 0.0, upper = 0.0;
    for (int s = 0; s <= max_sum; ++s) {
      if (s <= observed) lower += count[static_cast<std::size_t>(s)];
      if (s >= observed) upper += count[static_cast<std::size_t>(s)];
    }
    const double denom = std::ldexp(1.0, static_cast<int>(n));
    out.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / denom);
    out.exact = true;
    return out;
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1) / 4.0;
  double var = nn * (nn + 1) * (2 * nn + 1) / 24.0;
  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    var -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  const double dev = std::max(std::abs(out.w_plus - mean) - 0.5, 0.0);
  const double z = dev / std::sqrt(var);
  out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

/// Linear centered kernel alignment, ||X1'X2||_F^2 / (||X1'X1||_F ||X2'X2||_F) on centered columns.
inline double linear_cka(const Matrix& x1, const Matrix& x2) {
  if (x1.rows() != x2.rows()) throw Error(ErrorCode::DimensionMismatch, "linear_cka row counts differ");
  const Matrix a = center_columns(x1);
  const Matrix b = center_columns(x2);
  const double aa = (a.transpose() * a).norm();
  const double bb = (b.transpose() * b).norm();
  if (!(aa > 0.0) || !(bb > 0.0)) throw Error(ErrorCode::ZeroMatrix, "linear_cka of a constant matrix");
  const double ab = (a.transpose() * b).squaredNorm();
  return std::clamp(ab / (aa * bb), 0.0, 1.0);
}

struct CeilingCheck {
  bool pass = false;
  double margin = 0.0;           // (1 - r2_comp + tol) - r2_geom
  double budget = 0.0;           // 1 - r2_comp
  double budget_fraction = 0.0;  // r2_geom / budget
};

/// Geometric accessibility cannot exceed the non-compositional variance budget 1 - R2_comp.
inline CeilingCheck ceiling_check(double r2_geom, double r2_comp, double tol = 0.0) {
  CeilingCheck c;
  c.budget = 1.0 - r2_comp;
  c.margin = c.budget + tol - r2_geom;
  c.pass = c.margin >= 0.0;
  if (c.budget > 0.0) c.budget_fraction = r2_geom / c.budget;
  else c.budget_fraction = r2_geom > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return c;
}

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population
};

inline Summary summarize(std::span<const double> v) {
  if (v.empty()) return {};
  const Vector x = from_std(v);
  return {x.mean(), std::sqrt(variance(x))};
}

}  // namespace probekit
