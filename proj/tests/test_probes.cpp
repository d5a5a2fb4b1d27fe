#include <gtest/gtest.h>

#include "helpers.hpp"
#include "probekit/probes/gbt.hpp"
#include "probekit/probes/logistic.hpp"
#include "probekit/probes/metrics.hpp"
#include "probekit/probes/mlp.hpp"
#include "probekit/probes/ridge.hpp"
#include "probekit/residual.hpp"

using namespace probekit;
using testing_util::code_of;
using testing_util::gaussian;
using testing_util::gaussian_vector;

TEST(Ridge, OneDimensionalClosedForm) {
  Matrix x(3, 1);
  x << 0, 1, 2;
  Vector y(3);
  y << 0, 1, 2;
  const auto m = ridge_fit(x, y, 1.0);
  EXPECT_NEAR(m.weights(0), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.intercept, 1.0 / 3.0, 1e-12);
}

TEST(Ridge, HugePenaltyPredictsMean) {
  const Matrix x = gaussian(40, 5, 1);
  const Vector y = gaussian_vector(40, 2).array() + 3.0;
  const auto m = ridge_fit(x, y, 1e12);
  EXPECT_LE(m.weights.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(m.intercept, y.mean(), 1e-9);
}

TEST(Ridge, ZeroPenaltyIsOls) {
  const Matrix x = gaussian(30, 4, 3);
  const Vector y = gaussian_vector(30, 4);
  const auto m = ridge_fit(x, y, 0.0);
  const Vector ols = lstsq(with_intercept(x), y);
  EXPECT_NEAR(m.intercept, ols(0), 1e-10);
  EXPECT_LE((m.weights - ols.tail(4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ridge, ConstantTargetGivesZeroWeights) {
  const auto m = ridge_fit(gaussian(10, 3, 5), Vector::Constant(10, 2.5), 1.0);
  EXPECT_LE(m.weights.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(m.intercept, 2.5, 1e-12);
}

TEST(Ridge, LeaveOneOutMatchesBruteForce) {
  const Matrix x = gaussian(12, 3, 6);
  const Vector y = x * Vector::LinSpaced(3, 1.0, -1.0) + 0.5 * gaussian_vector(12, 7);
  const std::vector<double> grid = {1e-3, 0.1, 1.0, 10.0, 1e3};
  const auto path = ridge_cv_path(x, y, grid);
  for (std::size_t a = 0; a < grid.size(); ++a) {
    double sse = 0.0;
    for (Index i = 0; i < 12; ++i) {
      RowSet keep;
      for (Index r = 0; r < 12; ++r)
        if (r != i) keep.push_back(r);
      const auto m = ridge_fit(select_rows(x, keep), select_rows(y, keep), grid[a]);
      const double err = y(i) - (x.row(i).dot(m.weights) + m.intercept);
      sse += err * err;
    }
    EXPECT_NEAR(path.loo_mse[a], sse / 12.0, 1e-8);
  }
}

TEST(Ridge, NoiselessTargetSelectsSmallestAlpha) {
  const Matrix x = gaussian(60, 5, 8);
  const Vector y = x * Vector::LinSpaced(5, 1.0, 3.0);
  const auto grid = default_alpha_grid();
  const auto m = ridge_cv_select(x, y, grid);
  EXPECT_EQ(m.alpha, grid.front());
  EXPECT_GE(r2_score(y, m.predict(x)), 0.999);
}

TEST(Ridge, PureNoiseSelectsLargeAlpha) {
  const auto grid = default_alpha_grid();
  int upper = 0;
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Matrix x = gaussian(150, 40, 100 + seed);
    const Vector y = gaussian_vector(150, 200 + seed);
    const auto m = ridge_cv_select(x.topRows(100), y.head(100), grid);
    if (m.alpha >= grid[10]) ++upper;
    total += r2_score(y.tail(50), m.predict(x.bottomRows(50)));
  }
  EXPECT_GE(upper, 27);
  EXPECT_LE(total / 30.0, 0.05);
}

TEST(Ridge, WeightNormShrinksWithAlpha) {
  const Matrix x = gaussian(50, 8, 9);
  const Vector y = gaussian_vector(50, 10);
  double prev = std::numeric_limits<double>::infinity();
  for (double a : default_alpha_grid()) {
    const double norm = ridge_fit(x, y, a).weights.norm();
    EXPECT_LE(norm, prev + 1e-12);
    prev = norm;
  }
}

TEST(Ridge, CenteredDataHasZeroIntercept) {
  const Matrix x = center_columns(gaussian(25, 4, 11));
  const Vector y0 = gaussian_vector(25, 12);
  const Vector y = y0.array() - y0.mean();
  for (double a : {0.0, 0.5, 100.0}) EXPECT_NEAR(ridge_fit(x, y, a).intercept, 0.0, 1e-10);
}

TEST(Ridge, GridMustBeAscending) {
  const Matrix x = gaussian(10, 2, 1);
  const Vector y = gaussian_vector(10, 2);
  const std::vector<double> bad = {1.0, 0.1};
  EXPECT_EQ(code_of([&] { ridge_cv_select(x, y, bad); }), ErrorCode::InvalidConfig);
  const std::vector<double> grid = {1.0};
  EXPECT_EQ(code_of([&] { ridge_cv_select(x.topRows(2), y.head(2), grid); }), ErrorCode::TooFewRows);
  EXPECT_EQ(log_grid(1e-3, 1e6, 20).size(), 20u);
  EXPECT_NEAR(default_alpha_grid().front(), 1e-3, 1e-18);
  EXPECT_NEAR(default_alpha_grid().back(), 1e6, 1e-6);
}

TEST(Ridge, InterceptOffPathology) {
  const Index n = 400;
  const Matrix z = gaussian(n, 6, 13);
  const Matrix x = z * gaussian(6, 30, 14) + gaussian(n, 30, 15);
  const Matrix resid = ols_project(x, z).x_geom;
  const Vector signal = resid * gaussian_vector(30, 16, 0.1) + gaussian_vector(n, 17);
  const double sd = std::sqrt(variance(signal));
  const Vector y = signal.array() + 5.3 * sd;
  const auto grid = default_alpha_grid();
  const auto off = ridge_cv_select(resid.topRows(300), y.head(300), grid, false);
  const auto on = ridge_cv_select(resid.topRows(300), y.head(300), grid, true);
  EXPECT_LE(r2_score(y.tail(100), off.predict(resid.bottomRows(100))), -10.0);
  EXPECT_GT(r2_score(y.tail(100), on.predict(resid.bottomRows(100))), -0.2);
}

TEST(R2Score, HandCases) {
  Vector y(3), p(3);
  y << 0, 1, 2;
  p << 0, 2, 2;
  EXPECT_DOUBLE_EQ(r2_score(y, y), 1.0);
  EXPECT_DOUBLE_EQ(r2_score(y, Vector::Constant(3, 1.0)), 0.0);
  EXPECT_DOUBLE_EQ(r2_score(y, p), 0.5);
  EXPECT_EQ(code_of([] { r2_score(Vector::Ones(4), Vector::Zero(4)); }), ErrorCode::ZeroVarianceTarget);
}

TEST(R2Score, AffineInvariance) {
  const Vector y = gaussian_vector(40, 18);
  const Vector p = y + 0.7 * gaussian_vector(40, 19);
  const double base = r2_score(y, p);
  for (double a : {-3.0, 0.01, 250.0}) {
    const Vector ya = (a * y).array() + 7.0;
    const Vector pa = (a * p).array() + 7.0;
    EXPECT_NEAR(r2_score(ya, pa), base, 1e-12);
  }
}

// ---------------------------------------------------------------------------

namespace {

Labels alternating(Index n) {
  Labels l(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) l[static_cast<std::size_t>(i)] = static_cast<int>(i % 2);
  return l;
}

}  // namespace

TEST(Logistic, SeparableBlobs) {
  const Index n = 200;
  Matrix x = gaussian(n, 2, 20, 0.5);
  const Labels y = alternating(n);
  for (Index i = 0; i < n; ++i) x.row(i).array() += y[static_cast<std::size_t>(i)] ? 3.0 : -3.0;
  const auto folds = stratified_folds(y, 5, 1);
  EXPECT_GE(logistic_cv_probe(x, y, folds).mean_accuracy, 0.99);
}

TEST(Logistic, IdenticalRowsAreAtChance) {
  const Index n = 100;
  const Matrix x = Matrix::Constant(n, 3, 0.25);
  const Labels y = alternating(n);
  const auto r = logistic_cv_probe(x, y, stratified_folds(y, 5, 2));
  EXPECT_NEAR(r.mean_accuracy, 0.5, 0.05);
}

TEST(Logistic, FlipSymmetry) {
  const Index n = 120;
  const Matrix x = gaussian(n, 4, 21);
  Labels y(static_cast<std::size_t>(n)), flipped(static_cast<std::size_t>(n));
  const Vector noise = gaussian_vector(n, 22);
  for (Index i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = x(i, 0) + x(i, 1) + noise(i) > 0;
    flipped[static_cast<std::size_t>(i)] = 1 - y[static_cast<std::size_t>(i)];
  }
  const auto folds = stratified_folds(y, 5, 3);
  const auto a = logistic_cv_probe(x, y, folds);
  const auto b = logistic_cv_probe(-x, flipped, folds);
  EXPECT_NEAR(a.mean_accuracy, b.mean_accuracy, 1e-12);
  const auto m1 = fit_logistic(x, y, 1.0);
  const auto m2 = fit_logistic(-x, flipped, 1.0);
  EXPECT_LE((m1.weights - m2.weights).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(m1.intercept, -m2.intercept, 1e-6);
}

TEST(Logistic, StratifiedFoldsPartition) {
  const Labels y = alternating(53);
  const auto folds = stratified_folds(y, 5, 4);
  std::vector<int> seen(53, 0);
  for (const auto& f : folds) {
    EXPECT_EQ(f.train.size() + f.test.size(), 53u);
    int ones = 0;
    for (Index r : f.test) {
      ++seen[static_cast<std::size_t>(r)];
      ones += y[static_cast<std::size_t>(r)];
    }
    EXPECT_LE(std::abs(2 * ones - static_cast<int>(f.test.size())), 2);
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Logistic, SingleClassFold) {
  const Matrix x = gaussian(10, 2, 23);
  Labels y(10, 0);
  y[9] = 1;
  std::vector<Fold> folds = {{{0, 1, 2, 3, 4, 5, 6, 7}, {8, 9}}};
  EXPECT_EQ(code_of([&] { logistic_cv_probe(x, y, folds); }), ErrorCode::SingleClassFold);
}

// ---------------------------------------------------------------------------

TEST(Gbt, ConstantTarget) {
  const Matrix x = gaussian(40, 3, 24);
  const auto m = gbt_fit(x, Vector::Constant(40, 1.5), {20, 3, 0.1, 1});
  for (const auto& t : m.trees) EXPECT_EQ(t.leaf_count(), 1u);
  const Vector p = m.predict(gaussian(10, 3, 25));
  EXPECT_LE((p.array() - 1.5).abs().maxCoeff(), 1e-12);
}

TEST(Gbt, StepFunction) {
  const Matrix x = gaussian(200, 3, 26);
  Vector y(200);
  for (Index i = 0; i < 200; ++i) y(i) = x(i, 1) > 0.3 ? 2.0 : -1.0;
  const auto m = gbt_fit(x, y, {50, 1, 0.1, 1});
  EXPECT_GE(r2_score(y, m.predict(x)), 0.95);
}

TEST(Gbt, InteractionBeatsRidge) {
  const Matrix x = gaussian(700, 2, 27);
  const Vector y = x.col(0).cwiseProduct(x.col(1));
  const Matrix xtr = x.topRows(500), xte = x.bottomRows(200);
  const Vector ytr = y.head(500), yte = y.tail(200);
  EXPECT_GE(r2_score(yte, gbt_probe(xtr, ytr, xte)), 0.5);
  EXPECT_LE(r2_score(yte, ridge_cv_select(xtr, ytr, default_alpha_grid()).predict(xte)), 0.05);
}

TEST(Gbt, LossNonIncreasingAndDepthBounded) {
  const Matrix x = gaussian(150, 5, 28);
  const Vector y = x.col(0).array().sin() + x.col(2).array().square() + 0.3 * gaussian_vector(150, 29).array();
  for (int depth : {1, 2, 4}) {
    const auto m = gbt_fit(x, y, {60, depth, 0.2, 1});
    ASSERT_EQ(m.train_loss.size(), 61u);
    for (std::size_t i = 1; i < m.train_loss.size(); ++i) EXPECT_LE(m.train_loss[i], m.train_loss[i - 1] + 1e-12);
    for (const auto& t : m.trees) EXPECT_LE(t.depth(), depth);
  }
}

TEST(Gbt, Errors) {
  EXPECT_EQ(code_of([] { gbt_probe(gaussian(19, 2, 1), gaussian_vector(19, 2), gaussian(3, 2, 3)); }),
            ErrorCode::TooFewRows);
  EXPECT_EQ(code_of([] { gbt_fit(gaussian(30, 2, 1), gaussian_vector(30, 2), {10, 2, 0.0, 1}); }),
            ErrorCode::InvalidConfig);
}

// ---------------------------------------------------------------------------

TEST(Mlp, RecoversLinearTarget) {
  const Matrix x = gaussian(600, 5, 30);
  const Vector y = x * Vector::LinSpaced(5, -1.0, 2.0);
  MlpConfig cfg;
  cfg.seed = 3;
  const Vector p = mlp_probe(x.topRows(500), y.head(500), x.bottomRows(100), cfg);
  EXPECT_GE(r2_score(y.tail(100), p), 0.95);
}

TEST(Mlp, ZeroEpochsIsUntrained) {
  const Matrix x = gaussian(300, 5, 31);
  const Vector y = x * Vector::LinSpaced(5, -1.0, 2.0);
  MlpConfig cfg;
  cfg.max_epochs = 0;
  const auto m = mlp_fit(x.topRows(200), y.head(200), cfg);
  EXPECT_EQ(m.epochs_run, 0);
  EXPECT_LE(r2_score(y.tail(100), m.predict(x.bottomRows(100))), 0.1);
}

TEST(Mlp, DeterministicForSeed) {
  const Matrix x = gaussian(200, 4, 32);
  const Vector y = x.col(0).array().square() + x.col(1).array();
  MlpConfig cfg;
  cfg.seed = 11;
  cfg.max_epochs = 30;
  const auto a = mlp_fit(x, y, cfg);
  const auto b = mlp_fit(x, y, cfg);
  EXPECT_EQ(a.w1, b.w1);
  EXPECT_EQ(a.w3, b.w3);
  EXPECT_EQ(a.predict(x), b.predict(x));
  cfg.seed = 12;
  EXPECT_NE(mlp_fit(x, y, cfg).predict(x), a.predict(x));
  cfg.hidden1 = 0;
  EXPECT_EQ(code_of([&] { mlp_fit(x, y, cfg); }), ErrorCode::InvalidConfig);
}
