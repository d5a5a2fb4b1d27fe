#pragma once

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "probekit/error.hpp"
#include "probekit/matrix.hpp"
#include "probekit/random.hpp"
#include "probekit/probes/ridge.hpp"
#include "probekit/residual.hpp"

namespace probekit {

using Labels = std::vector<int>;  // 0 / 1

struct LogisticModel {
  Vector weights;
  double intercept = 0.0;
  double c = 1.0;  // inverse L2 strength
  int iterations = 0;
  bool converged = false;

  Vector decision(const Matrix& x) const {
    Vector z = x * weights;
    z.array() += intercept;
    return z;
  }

  Labels predict(const Matrix& x) const {
    const Vector z = decision(x);
    Labels out(static_cast<std::size_t>(z.size()));
    for (Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = z(i) >= 0.0 ? 1 : 0;
    return out;
  }
};

struct LogisticOptions {
  double tol = 1e-8;
  int max_iter = 200;
};

/// Inverse-strength grid: 10 log-spaced values in [1e-2, 1e4].
inline std::vector<double> default_c_grid() { return log_grid(1e-2, 1e4, 10); }

namespace detail {

inline double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

/// Minimizes sum(log-loss) + ||w||^2 / (2C), intercept unpenalized, by damped Newton steps.
inline LogisticModel fit_logistic(const Matrix& x, std::span<const int> labels, double c,
                                  const LogisticOptions& opt = {}, const LogisticModel* warm = nullptr) {
  if (x.rows() != static_cast<Index>(labels.size())) throw Error(ErrorCode::DimensionMismatch, "logistic labels");
  if (!(c > 0.0)) throw Error(ErrorCode::InvalidConfig, "C must be positive");
  const Index n = x.rows();
  const Index d = x.cols();
  Vector y(n);
  for (Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;

  Vector theta = Vector::Zero(d + 1);  // [intercept, w]
  if (warm != nullptr && warm->weights.size() == d) {
    theta(0) = warm->intercept;
    theta.tail(d) = warm->weights;
  } else {
    const double p = std::clamp(y.mean(), 1e-6, 1 - 1e-6);
    theta(0) = std::log(p / (1 - p));
  }
  const double inv_c = 1.0 / c;

  auto objective = [&](const Vector& t) {
    const Vector z = (x * t.tail(d)).array() + t(0);
    double f = 0.0;
    for (Index i = 0; i < n; ++i) f += detail::log1pexp(z(i)) - y(i) * z(i);
    return f + 0.5 * inv_c * t.tail(d).squaredNorm();
  };

  LogisticModel m;
  m.c = c;
  double f = objective(theta);
  for (int it = 0; it < opt.max_iter; ++it) {
    m.iterations = it + 1;
    const Vector z = (x * theta.tail(d)).array() + theta(0);
    Vector p(n), w(n);
    for (Index i = 0; i < n; ++i) {
      p(i) = detail::sigmoid(z(i));
      w(i) = p(i) * (1.0 - p(i));
    }
    const Vector r = p - y;
    Vector grad(d + 1);
    grad(0) = r.sum();
    grad.tail(d) = x.transpose() * r + inv_c * theta.tail(d);

    Matrix h(d + 1, d + 1);
    h(0, 0) = w.sum() + 1e-12;
    const Vector xw = x.transpose() * w;
    h.block(1, 0, d, 1) = xw;
    h.block(0, 1, 1, d) = xw.transpose();
    h.block(1, 1, d, d) = x.transpose() * w.asDiagonal() * x;
    h.block(1, 1, d, d).diagonal().array() += inv_c;

    const Vector step = h.ldlt().solve(grad);
    double t = 1.0;
    Vector next = theta - step;
    double f_next = objective(next);
    const double slope = grad.dot(step);
    while (f_next > f - 1e-4 * t * slope && t > 1e-10) {
      t *= 0.5;
      next = theta - t * step;
      f_next = objective(next);
    }
    const double moved = (t * step).lpNorm<Eigen::Infinity>();
    if (f_next <= f) {
      theta = next;
      f = f_next;
    }
    if (moved < opt.tol || grad.lpNorm<Eigen::Infinity>() < opt.tol) {
      m.converged = true;
      break;
    }
  }
  m.intercept = theta(0);
  m.weights = theta.tail(d);
  return m;
}

inline double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size() || truth.empty()) throw Error(ErrorCode::DimensionMismatch, "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Stratified K-fold split: each class is shuffled and dealt round-robin across folds.
inline std::vector<Fold> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed,
                                          std::span<const Index> rows = {}) {
  if (k < 2) throw Error(ErrorCode::InvalidConfig, "need at least 2 folds");
  const std::size_t n = rows.empty() ? labels.size() : rows.size();
  auto row_at = [&](std::size_t i) { return rows.empty() ? static_cast<Index>(i) : rows[i]; };
  std::vector<RowSet> by_class(2);
  for (std::size_t i = 0; i < n; ++i) by_class[labels[static_cast<std::size_t>(row_at(i))] ? 1 : 0].push_back(row_at(i));
  // Deal the larger class first (ties: the class owning the first row) so that
  // relabelling 0 <-> 1 yields the same folds.
  const bool swap = by_class[1].size() > by_class[0].size() ||
                    (by_class[1].size() == by_class[0].size() && !by_class[1].empty() && by_class[1].front() == row_at(0));
  if (swap) std::swap(by_class[0], by_class[1]);
  Rng rng(seed);
  std::vector<RowSet> members(static_cast<std::size_t>(k));
  std::size_t dealt = 0;
  for (auto& cls : by_class) {
    shuffle_in_place(cls, rng);
    for (Index r : cls) members[dealt++ % static_cast<std::size_t>(k)].push_back(r);
  }
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    folds[f].test = members[f];
    std::sort(folds[f].test.begin(), folds[f].test.end());
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f) folds[f].train.insert(folds[f].train.end(), members[g].begin(), members[g].end());
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

struct LogisticCvResult {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::vector<double> fold_accuracy;
  std::vector<double> chosen_c;
};

struct LogisticCvOptions {
  std::vector<double> c_grid = default_c_grid();
  int inner_folds = 3;
  std::uint64_t seed = 0;
  LogisticOptions solver{};
};

namespace detail {

inline Labels gather(std::span<const int> labels, std::span<const Index> rows) {
  Labels out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
  return out;
}

inline bool has_both_classes(std::span<const int> labels) {
  bool zero = false, one = false;
  for (int l : labels) (l ? one : zero) = true;
  return zero && one;
}

}  // namespace detail

/// Held-out accuracy over the given folds; C is chosen on each training split by
/// inner stratified CV accuracy (first maximum, i.e. the strongest penalty among ties).
inline LogisticCvResult logistic_cv_probe(const Matrix& x, std::span<const int> labels, std::span<const Fold> folds,
                                          const LogisticCvOptions& opt = {}) {
  if (x.rows() != static_cast<Index>(labels.size())) throw Error(ErrorCode::DimensionMismatch, "logistic labels");
  if (opt.c_grid.empty()) throw Error(ErrorCode::InvalidConfig, "empty C grid");
  LogisticCvResult out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    const Labels train_labels = detail::gather(labels, fold.train);
    if (!detail::has_both_classes(train_labels))
      throw Error(ErrorCode::SingleClassFold, "fold " + std::to_string(f));
    if (fold.test.empty()) continue;

    double best_c = opt.c_grid.front();
    if (opt.c_grid.size() > 1) {
      const auto inner = stratified_folds(labels, opt.inner_folds, mix_seed(opt.seed, f), fold.train);
      std::vector<double> score(opt.c_grid.size(), 0.0);
      std::size_t used = 0;
      for (const auto& in : inner) {
        const Labels in_train = detail::gather(labels, in.train);
        if (in.test.empty() || !detail::has_both_classes(in_train)) continue;
        ++used;
        const Matrix xtr = select_rows(x, in.train);
        const Matrix xte = select_rows(x, in.test);
        const Labels in_test = detail::gather(labels, in.test);
        LogisticModel prev;
        for (std::size_t ci = 0; ci < opt.c_grid.size(); ++ci) {
          prev = fit_logistic(xtr, in_train, opt.c_grid[ci], opt.solver, ci ? &prev : nullptr);
          score[ci] += accuracy(in_test, prev.predict(xte));
        }
      }
      if (used > 0) best_c = opt.c_grid[static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin())];
      else best_c = 1.0;
    }
    const auto model = fit_logistic(select_rows(x, fold.train), train_labels, best_c, opt.solver);
    const Labels test_labels = detail::gather(labels, fold.test);
    out.fold_accuracy.push_back(accuracy(test_labels, model.predict(select_rows(x, fold.test))));
    out.chosen_c.push_back(best_c);
  }
  if (out.fold_accuracy.empty()) throw Error(ErrorCode::TooFewRows, "no non-empty test folds");
  const Vector acc = from_std(out.fold_accuracy);
  out.mean_accuracy = acc.mean();
  out.std_accuracy = std::sqrt(variance(acc));
  return out;
}

}  // namespace probekit
