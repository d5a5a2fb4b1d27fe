#include <Eigen/QR>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "probekit/probes/metrics.hpp"
#include "probekit/probes/ridge.hpp"
#include "probekit/random.hpp"
#include "probekit/residual.hpp"

using namespace probekit;
using testing_util::code_of;
using testing_util::gaussian;

namespace {

Matrix cross_cov(const Matrix& a, const Matrix& b) {
  return center_columns(a).transpose() * center_columns(b) / static_cast<double>(a.rows());
}

Matrix random_rotation(std::uint64_t seed) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(3, 3, seed));
  Matrix q = qr.householderQ() * Matrix::Identity(3, 3);
  if (q.determinant() < 0) q.col(0) *= -1;
  return q;
}

}  // namespace

TEST(OlsProject, SelfProjectionLeavesNothing) {
  const Matrix z = gaussian(20, 3, 1);
  const auto dec = ols_project(z, z);
  EXPECT_LE(dec.x_geom.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(OlsProject, ConstantFeatureIsInterceptOnly) {
  const Matrix x = gaussian(15, 4, 2);
  const Matrix z = Matrix::Constant(15, 1, 3.0);
  const auto dec = ols_project(x, z);
  const Vector means = x.colwise().mean().transpose();
  for (Index r = 0; r < x.rows(); ++r) EXPECT_LE((dec.x_comp.row(r).transpose() - means).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((dec.x_geom - center_columns(x)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(OlsProject, FourPointHandExample) {
  Matrix x(4, 1), z(4, 1);
  x << 1, 2, 3, 5;
  z << 0, 1, 2, 3;
  const auto dec = ols_project(x, z);
  EXPECT_NEAR(dec.beta(0, 0), 0.8, 1e-12);
  EXPECT_NEAR(dec.beta(1, 0), 1.3, 1e-12);
  const double expected[] = {0.2, -0.1, -0.4, 0.3};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(dec.x_geom(i, 0), expected[i], 1e-12);
}

TEST(OlsProject, TooFewRows) {
  EXPECT_EQ(code_of([] { ols_project(gaussian(4, 2, 1), gaussian(4, 3, 2)); }), ErrorCode::TooFewRows);
}

TEST(OlsProject, RankDeficientZIsMinimumNorm) {
  Matrix z = gaussian(30, 3, 4);
  z.col(2) = z.col(0) + z.col(1);
  const Matrix x = gaussian(30, 5, 5);
  const auto dec = ols_project(x, z);
  EXPECT_TRUE(dec.beta.allFinite());
  EXPECT_LE((with_intercept(z).transpose() * dec.x_geom).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(OlsProjectProperty, CompletenessOrthogonalityQrIdempotence) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Index n = 12 + static_cast<Index>(seed) * 3, d = 1 + static_cast<Index>(seed % 7), k = 1 + static_cast<Index>(seed % 5);
    const Matrix z = gaussian(n, k, seed * 2 + 100);
    const Matrix x = z * gaussian(k, d, seed + 7) + gaussian(n, d, seed * 3 + 1);
    const auto dec = ols_project(x, z);
    EXPECT_LE((dec.x_geom + dec.x_comp - x).cwiseAbs().maxCoeff(), 1e-9);
    const Matrix za = with_intercept(z);
    EXPECT_LE((za.transpose() * dec.x_geom).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, x.cwiseAbs().maxCoeff() * n));

    Eigen::HouseholderQR<Matrix> qr(za);
    const Matrix q = qr.householderQ() * Matrix::Identity(n, za.cols());
    EXPECT_LE((dec.x_geom - (x - q * (q.transpose() * x))).cwiseAbs().maxCoeff(), 1e-8);

    EXPECT_LE((ols_project(dec.x_geom, z).x_geom - dec.x_geom).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Foldwise, EmptyTestEqualsGlobalOnTrain) {
  const Matrix x = gaussian(20, 3, 1), z = gaussian(20, 2, 2);
  Fold fold;
  for (Index i = 0; i < 20; ++i) fold.train.push_back(i);
  const auto res = foldwise_residualize(x, z, fold);
  EXPECT_EQ(res.geom_test.rows(), 0);
  EXPECT_LE((res.geom_train - ols_project(x, z).x_geom).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Foldwise, PlantedModelAppliedOutOfFold) {
  const Index n = 30;
  const Matrix z = gaussian(n, 2, 3);
  Matrix beta(3, 2);
  beta << 0.5, -1, 2, 0.3, -0.7, 1.1;
  Matrix x = with_intercept(z) * beta;
  Fold fold;
  for (Index i = 0; i < n; ++i) (i < 20 ? fold.train : fold.test).push_back(i);
  const Matrix bump = gaussian(10, 2, 9);
  x.bottomRows(10) += bump;  // test rows leave the linear model
  const auto res = foldwise_residualize(x, z, fold);
  EXPECT_LE(res.geom_train.cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((res.geom_test - bump).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Foldwise, TestRowPermutationCommutes) {
  const Matrix x = gaussian(25, 4, 5), z = gaussian(25, 2, 6);
  Fold a, b;
  for (Index i = 0; i < 18; ++i) a.train.push_back(i);
  a.test = {18, 19, 20, 21, 22, 23, 24};
  b.train = a.train;
  b.test = {24, 20, 18, 23, 19, 22, 21};
  const auto ra = foldwise_residualize(x, z, a);
  const auto rb = foldwise_residualize(x, z, b);
  for (std::size_t i = 0; i < b.test.size(); ++i) {
    const Index src = b.test[i] - 18;
    EXPECT_EQ((rb.geom_test.row(static_cast<Index>(i)) - ra.geom_test.row(src)).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Foldwise, Errors) {
  const Matrix x = gaussian(10, 2, 1), z = gaussian(10, 2, 2);
  Fold overlap{{0, 1, 2, 3, 4, 5}, {5, 6}};
  EXPECT_EQ(code_of([&] { foldwise_residualize(x, z, overlap); }), ErrorCode::OverlappingFolds);
  Fold tiny{{0, 1, 2}, {3, 4}};
  EXPECT_EQ(code_of([&] { foldwise_residualize(x, z, tiny); }), ErrorCode::TooFewRows);
}

// ---------------------------------------------------------------------------

TEST(Leace, IndependentConceptIsIdentity) {
  const Index n = 40;
  const Matrix x = gaussian(n, 4, 1);
  Matrix z = gaussian(n, 2, 2);
  z = ols_project(z, x).x_geom;  // zero sample cross-covariance with X
  const auto e = leace_fit(x, z);
  EXPECT_LE((e.map - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Leace, DuplicatedConceptCollapsesToMeans) {
  const Matrix z = gaussian(50, 1, 3);
  const Matrix x = z.replicate(1, 3);
  const auto e = leace_fit(x, z);
  const Matrix erased = leace_apply(e, x);
  for (Index r = 0; r < erased.rows(); ++r)
    EXPECT_LE((erased.row(r).transpose() - e.mu_x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Leace, MinimalDisplacementAgainstBruteForce) {
  // Every linear map M with M * Sxz = 0 erases the concept; LEACE must have the smallest
  // expected whitened displacement tr(W (M - I) Sxx (M - I)^T W) among them.
  const Index n = 400;
  const Matrix z = gaussian(n, 1, 10);
  Matrix x = gaussian(n, 3, 11);
  x.col(0) += 1.5 * z.col(0);
  x.col(1) += 0.5 * z.col(0) + 0.3 * x.col(2);
  const Matrix xc = center_columns(x);
  const Matrix sxx = xc.transpose() * xc / static_cast<double>(n);
  const Matrix sxz = cross_cov(x, z);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sxx);
  const Matrix w = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  auto cost = [&](const Matrix& m) {
    const Matrix diff = m - Matrix::Identity(3, 3);
    return (w * diff * sxx * diff.transpose() * w).trace();
  };
  const auto e = leace_fit(x, z);
  EXPECT_LE((e.map * sxz).cwiseAbs().maxCoeff(), 1e-10);
  const double best = cost(e.map);

  const Vector u = sxz.col(0) / sxz.norm();
  const Matrix null_proj = Matrix::Identity(3, 3) - u * u.transpose();  // M = N * null_proj satisfies the constraint
  Rng rng(12);
  std::normal_distribution<double> dist;
  int checked = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    Matrix n3(3, 3);
    for (Index i = 0; i < 9; ++i) n3(i) = dist(rng);
    const double scale = trial % 2 ? 1.0 : 1e-3;
    const Matrix candidate = trial % 2 ? Matrix(n3 * null_proj) : Matrix(e.map + scale * n3 * null_proj);
    ASSERT_LE((candidate * sxz).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GE(cost(candidate), best - 1e-10);
    ++checked;
  }
  EXPECT_EQ(checked, 20000);
}

TEST(Leace, IdempotentGuardedAndUncorrelated) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Index n = 200, d = 12, k = 3;
    const Matrix z = gaussian(n, k, seed + 50);
    const Matrix x = z * gaussian(k, d, seed + 60) + 0.5 * gaussian(n, d, seed + 70);
    const auto e = leace_fit(x, z);
    const Matrix once = leace_apply(e, x);
    const Matrix twice = leace_apply(e, once);
    EXPECT_LE((once - twice).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE(cross_cov(once, z).cwiseAbs().maxCoeff(), 1e-8);
    for (Index c = 0; c < k; ++c) {
      const Vector target = z.col(c);
      const Vector fitted = with_intercept(once) * lstsq(with_intercept(once), target);
      EXPECT_LE(r2_score(target, fitted), 1e-6);
    }
  }
}

TEST(Leace, ApplyIdentityAndZeroMaps) {
  const Matrix x = gaussian(7, 3, 1);
  Eraser id{x.colwise().mean().transpose(), Vector::Zero(1), Matrix::Identity(3, 3)};
  EXPECT_LE((leace_apply(id, x) - x).cwiseAbs().maxCoeff(), 1e-14);
  Eraser zero{id.mu_x, Vector::Zero(1), Matrix::Zero(3, 3)};
  const Matrix collapsed = leace_apply(zero, x);
  for (Index r = 0; r < 7; ++r) EXPECT_EQ(collapsed.row(r), id.mu_x.transpose());
  EXPECT_EQ(code_of([&] { leace_apply(id, gaussian(2, 4, 1)); }), ErrorCode::DimensionMismatch);
}

TEST(Leace, HeldOutCrossCovarianceShrinks) {
  const Index n = 600;
  const Matrix z = gaussian(n, 2, 80);
  const Matrix x = z * gaussian(2, 10, 81) + 0.3 * gaussian(n, 10, 82);
  const auto e = leace_fit(x.topRows(400), z.topRows(400));
  const Matrix raw = cross_cov(x.bottomRows(200), z.bottomRows(200));
  const Matrix erased = cross_cov(leace_apply(e, x.bottomRows(200)), z.bottomRows(200));
  EXPECT_LT(erased.norm(), 0.1 * raw.norm());
}

TEST(Leace, DegenerateCovariance) {
  EXPECT_EQ(code_of([] { leace_fit(Matrix::Ones(10, 3), gaussian(10, 1, 1)); }), ErrorCode::DegenerateCovariance);
}

// ---------------------------------------------------------------------------

TEST(Pca, FullDimsReconstructs) {
  const Matrix x = gaussian(20, 5, 3);
  const auto p = pca_fit(x, 5);
  const Matrix back = (p.transform(x) * p.components.transpose()).rowwise() + p.mean.transpose();
  EXPECT_LE((back - x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, RankOneCapturesAllVariance) {
  const Matrix x = gaussian(30, 1, 4) * gaussian(1, 6, 5);
  const auto p = pca_fit(x, 1);
  const double total = center_columns(x).squaredNorm() / 30.0;
  EXPECT_NEAR(p.explained_variance(0), total, 1e-10 * total);
}

TEST(Pca, MatchesCovarianceEigendecomposition) {
  const Matrix x = gaussian(5, 3, 6);
  const Matrix xc = center_columns(x);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(xc.transpose() * xc / 5.0);
  const auto p = pca_fit(x, 2);
  EXPECT_NEAR(p.explained_variance(0), eig.eigenvalues()(2), 1e-10);
  EXPECT_NEAR(p.explained_variance(1), eig.eigenvalues()(1), 1e-10);
  const Matrix out = pca_project(x, 2);
  EXPECT_EQ(out.cols(), 2);
  EXPECT_LE(center_columns(out).squaredNorm(), xc.squaredNorm() + 1e-10);
}

TEST(Pca, DimsTooLarge) {
  EXPECT_EQ(code_of([] { pca_fit(gaussian(4, 6, 1), 5); }), ErrorCode::DimsTooLarge);
  EXPECT_EQ(code_of([] { pca_fit(gaussian(8, 3, 1), 4); }), ErrorCode::DimsTooLarge);
}

TEST(RandomSubspace, DeterministicAndInterceptOnlyAtZero) {
  const Matrix x = gaussian(30, 4, 7);
  EXPECT_EQ(random_subspace_residual(x, 6, 42), random_subspace_residual(x, 6, 42));
  EXPECT_NE(random_subspace_residual(x, 6, 42), random_subspace_residual(x, 6, 43));
  EXPECT_LE((random_subspace_residual(x, 0, 1) - center_columns(x)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(code_of([&] { random_subspace_residual(x, 29, 1); }), ErrorCode::TooFewRows);
}

TEST(RandomSubspace, RemovesFarLessThanTrueComposition) {
  const Index n = 500;
  const Matrix z = gaussian(n, 6, 8);
  const Matrix x = z * gaussian(6, 20, 9) + gaussian(n, 20, 10);
  const double total = center_columns(x).squaredNorm();
  const double removed_true = total - ols_project(x, z).x_geom.squaredNorm();
  const double removed_random = total - random_subspace_residual(x, 6, 11).squaredNorm();
  EXPECT_LT(removed_random, 0.1 * removed_true);
}

// ---------------------------------------------------------------------------

TEST(SliceChannels, ScalarBlockIsIdentity) {
  const Matrix x = gaussian(5, 4, 1);
  ChannelLayout layout{{{0, 0, 4}}};
  EXPECT_EQ(slice_channels(x, layout, 0), x);
}

TEST(SliceChannels, PythagoreanNorm) {
  Matrix x(1, 5);
  x << 7, 8, 3, 4, 0;
  ChannelLayout layout{{{0, 0, 2}, {1, 2, 1}}};
  const Matrix v = slice_channels(x, layout, 1);
  ASSERT_EQ(v.cols(), 1);
  EXPECT_DOUBLE_EQ(v(0, 0), 5.0);
  EXPECT_EQ(code_of([&] { slice_channels(x, layout, 2); }), ErrorCode::MissingOrder);
  EXPECT_EQ(code_of([&] { slice_channels(x.leftCols(4), layout, 1); }), ErrorCode::LayoutMismatch);
}

TEST(SliceChannels, RotationInvariantNorms) {
  const Index channels = 6;
  ChannelLayout layout{{{0, 0, 4}, {1, 4, channels}}};
  const Matrix x = gaussian(20, 4 + 3 * channels, 21);
  const Matrix reference = slice_channels(x, layout, 1);
  for (std::uint64_t t = 0; t < 100; ++t) {
    const Matrix r = random_rotation(1000 + t);
    Matrix rotated = x;
    for (Index c = 0; c < channels; ++c) rotated.middleCols(4 + 3 * c, 3) = x.middleCols(4 + 3 * c, 3) * r.transpose();
    EXPECT_LE((slice_channels(rotated, layout, 1) - reference).cwiseAbs().maxCoeff(), 1e-10);
  }
}
