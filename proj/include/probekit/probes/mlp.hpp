#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "probekit/error.hpp"
#include "probekit/matrix.hpp"
#include "probekit/random.hpp"

namespace probekit {

struct MlpConfig {
  Index hidden1 = 256;
  Index hidden2 = 128;
  Index batch_size = 64;
  double validation_fraction = 0.15;
  int patience = 20;
  int max_epochs = 500;
  double learning_rate = 1e-3;
  double l2 = 1e-4;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden1 < 1 || hidden2 < 1 || batch_size < 1 || patience < 1 || max_epochs < 0 || !(learning_rate > 0.0) ||
        !(l2 >= 0.0) || !(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw Error(ErrorCode::InvalidConfig, "mlp configuration out of range");
  }
};

/// Two ReLU hidden layers and a linear output, trained on z-scored inputs and target.
struct MlpModel {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;
  Vector x_mean, x_scale;
  double y_mean = 0.0;
  double y_scale = 1.0;
  int epochs_run = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();

  Vector predict(const Matrix& x) const {
    const Matrix xs = standardize(x);
    const Matrix h1 = ((xs * w1).rowwise() + b1.transpose()).cwiseMax(0.0);
    const Matrix h2 = ((h1 * w2).rowwise() + b2.transpose()).cwiseMax(0.0);
    Vector out = (h2 * w3).col(0).array() + b3(0);
    return out.array() * y_scale + y_mean;
  }

  Matrix standardize(const Matrix& x) const {
    return (x.rowwise() - x_mean.transpose()).array().rowwise() / x_scale.transpose().array();
  }
};

namespace detail {

struct MlpGrads {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;
};

struct AdamState {
  MlpGrads m, v;
  int t = 0;
};

inline void glorot(Matrix& w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index c = 0; c < w.cols(); ++c)
    for (Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
}

inline double mlp_loss(const MlpModel& m, const Matrix& xs, const Vector& ys) {
  const Matrix h1 = ((xs * m.w1).rowwise() + m.b1.transpose()).cwiseMax(0.0);
  const Matrix h2 = ((h1 * m.w2).rowwise() + m.b2.transpose()).cwiseMax(0.0);
  const Vector out = (h2 * m.w3).col(0).array() + m.b3(0);
  return (out - ys).squaredNorm() / static_cast<double>(ys.size());
}

template <typename T>
void adam_step(T& param, const T& grad, T& m, T& v, double lr, int t) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  m = beta1 * m + (1 - beta1) * grad;
  v = beta2 * v + (1 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1 - std::pow(beta1, t);
  const double c2 = 1 - std::pow(beta2, t);
  param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace detail

/// Mini-batch Adam with early stopping on a held-out validation slice of the training rows.
/// The best-validation parameters are kept. Deterministic for a fixed seed.
inline MlpModel mlp_fit(const Matrix& x, const Vector& y, const MlpConfig& cfg = {}) {
  cfg.validate();
  if (x.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "mlp: X and y lengths differ");
  if (x.rows() < 50) throw Error(ErrorCode::TooFewRows, "mlp_probe needs at least 50 training rows");
  const Index n = x.rows();
  const Index d = x.cols();

  MlpModel m;
  m.x_mean = x.colwise().mean().transpose();
  m.x_scale = ((x.rowwise() - m.x_mean.transpose()).array().square().colwise().mean().sqrt()).transpose();
  for (Index j = 0; j < d; ++j)
    if (!(m.x_scale(j) > 0.0)) m.x_scale(j) = 1.0;
  m.y_mean = y.mean();
  m.y_scale = std::sqrt(variance(y));
  if (!(m.y_scale > 0.0)) m.y_scale = 1.0;

  Rng rng(cfg.seed);
  m.w1.resize(d, cfg.hidden1);
  m.w2.resize(cfg.hidden1, cfg.hidden2);
  m.w3.resize(cfg.hidden2, 1);
  detail::glorot(m.w1, rng);
  detail::glorot(m.w2, rng);
  detail::glorot(m.w3, rng);
  m.b1 = Vector::Zero(cfg.hidden1);
  m.b2 = Vector::Zero(cfg.hidden2);
  m.b3 = Vector::Zero(1);
  if (cfg.max_epochs == 0) return m;

  const Matrix xs_all = m.standardize(x);
  const Vector ys_all = (y.array() - m.y_mean) / m.y_scale;
  RowSet idx = permutation(n, mix_seed(cfg.seed, 1));
  const auto n_valid = std::max<Index>(1, static_cast<Index>(std::floor(cfg.validation_fraction * static_cast<double>(n))));
  const RowSet valid(idx.begin(), idx.begin() + n_valid);
  RowSet train(idx.begin() + n_valid, idx.end());
  const Matrix xv = select_rows(xs_all, valid);
  const Vector yv = select_rows(ys_all, valid);
  const Matrix xt = select_rows(xs_all, train);
  const Vector yt = select_rows(ys_all, train);
  RowSet order(static_cast<std::size_t>(xt.rows()));
  std::iota(order.begin(), order.end(), Index{0});

  detail::AdamState adam;
  auto zero_like = [](const MlpModel& p) {
    return detail::MlpGrads{Matrix::Zero(p.w1.rows(), p.w1.cols()), Matrix::Zero(p.w2.rows(), p.w2.cols()),
                            Matrix::Zero(p.w3.rows(), p.w3.cols()), Vector::Zero(p.b1.size()),
                            Vector::Zero(p.b2.size()),          Vector::Zero(1)};
  };
  adam.m = zero_like(m);
  adam.v = zero_like(m);

  MlpModel best = m;
  best.best_validation_loss = detail::mlp_loss(m, xv, yv);
  int since_best = 0;
  Rng shuffle_rng(mix_seed(cfg.seed, 2));
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle_in_place(order, shuffle_rng);
    for (Index start = 0; start < xt.rows(); start += cfg.batch_size) {
      const Index len = std::min(cfg.batch_size, xt.rows() - start);
      const std::span<const Index> rows(order.data() + start, static_cast<std::size_t>(len));
      const Matrix xb = select_rows(xt, rows);
      const Vector yb = select_rows(yt, rows);

      const Matrix z1 = (xb * m.w1).rowwise() + m.b1.transpose();
      const Matrix h1 = z1.cwiseMax(0.0);
      const Matrix z2 = (h1 * m.w2).rowwise() + m.b2.transpose();
      const Matrix h2 = z2.cwiseMax(0.0);
      const Vector out = (h2 * m.w3).col(0).array() + m.b3(0);

      const double scale = 1.0 / static_cast<double>(len);
      const Vector g_out = (out - yb) * scale;  // d(0.5 * mse)/d(out)
      detail::MlpGrads g;
      g.w3 = h2.transpose() * g_out + cfg.l2 * scale * m.w3;
      g.b3 = Vector::Constant(1, g_out.sum());
      Matrix g_h2 = g_out * m.w3.transpose();
      g_h2.array() *= (z2.array() > 0.0).cast<double>();
      g.w2 = h1.transpose() * g_h2 + cfg.l2 * scale * m.w2;
      g.b2 = g_h2.colwise().sum().transpose();
      Matrix g_h1 = g_h2 * m.w2.transpose();
      g_h1.array() *= (z1.array() > 0.0).cast<double>();
      g.w1 = xb.transpose() * g_h1 + cfg.l2 * scale * m.w1;
      g.b1 = g_h1.colwise().sum().transpose();

      ++adam.t;
      detail::adam_step(m.w1, g.w1, adam.m.w1, adam.v.w1, cfg.learning_rate, adam.t);
      detail::adam_step(m.w2, g.w2, adam.m.w2, adam.v.w2, cfg.learning_rate, adam.t);
      detail::adam_step(m.w3, g.w3, adam.m.w3, adam.v.w3, cfg.learning_rate, adam.t);
      detail::adam_step(m.b1, g.b1, adam.m.b1, adam.v.b1, cfg.learning_rate, adam.t);
      detail::adam_step(m.b2, g.b2, adam.m.b2, adam.v.b2, cfg.learning_rate, adam.t);
      detail::adam_step(m.b3, g.b3, adam.m.b3, adam.v.b3, cfg.learning_rate, adam.t);
    }
    m.epochs_run = epoch + 1;
    const double loss = detail::mlp_loss(m, xv, yv);
    if (loss < best.best_validation_loss - 1e-10) {
      best = m;
      best.best_validation_loss = loss;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  best.epochs_run = m.epochs_run;
  return best;
}

inline Vector mlp_probe(const Matrix& x_train, const Vector& y_train, const Matrix& x_eval, const MlpConfig& cfg = {}) {
  if (x_eval.cols() != x_train.cols()) throw Error(ErrorCode::DimensionMismatch, "mlp_probe column count");
  return mlp_fit(x_train, y_train, cfg).predict(x_eval);
}

}  // namespace probekit
