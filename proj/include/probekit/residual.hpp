#pragma once

#include <Eigen/SVD>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "probekit/error.hpp"
#include "probekit/matrix.hpp"
#include "probekit/matrixio.hpp"

namespace probekit {

/// Relative singular-value cutoff for the composition least-squares solve.
inline constexpr double kLstsqRcond = 1e-10;
/// Relative eigenvalue cutoff when whitening representation covariance.
inline constexpr double kWhitenRcond = 1e-10;

/// Minimum-norm least-squares solution of design * beta = rhs with SVD rank truncation.
inline Matrix lstsq(const Matrix& design, const Matrix& rhs, double rcond = kLstsqRcond) {
  Eigen::JacobiSVD<Matrix, Eigen::ColPivHouseholderQRPreconditioner> svd(design,
                                                                         Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(rcond);
  return svd.solve(rhs);
}

/// Composition projection fitted on some rows: beta maps intercept-augmented Z onto X.
struct CompositionProjection {
  Matrix beta;  // (k+1) x d, first row is the intercept

  Matrix composition_part(const Matrix& z) const { return with_intercept(z) * beta; }
  Matrix residual(const Matrix& x, const Matrix& z) const { return x - composition_part(z); }
};

inline CompositionProjection fit_composition_projection(const Matrix& x, const Matrix& z) {
  if (x.rows() != z.rows())
    throw Error(ErrorCode::DimensionMismatch, "X has " + std::to_string(x.rows()) + " rows, Z has " +
                                                   std::to_string(z.rows()));
  if (x.rows() <= z.cols() + 1)
    throw Error(ErrorCode::TooFewRows, std::to_string(x.rows()) + " rows for " + std::to_string(z.cols()) +
                                           " composition features plus intercept");
  return {lstsq(with_intercept(z), x)};
}

struct CpdDecomposition {
  Matrix beta;
  Matrix x_geom;
  Matrix x_comp;
};

/// Compositional probe decomposition: X = X_comp + X_geom, X_comp = [1 Z] beta.
inline CpdDecomposition ols_project(const Matrix& x, const Matrix& z) {
  auto proj = fit_composition_projection(x, z);
  Matrix comp = proj.composition_part(z);
  Matrix geom = x - comp;
  return {std::move(proj.beta), std::move(geom), std::move(comp)};
}

struct Fold {
  RowSet train;
  RowSet test;
};

struct FoldResidual {
  Matrix geom_train;
  Matrix geom_test;
  Matrix comp_train;
  Matrix comp_test;
};

inline void require_disjoint(const Fold& fold, Index n) {
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (Index r : fold.train) {
    if (r < 0 || r >= n) throw Error(ErrorCode::DimensionMismatch, "row index out of range");
    seen[static_cast<std::size_t>(r)] = 1;
  }
  for (Index r : fold.test) {
    if (r < 0 || r >= n) throw Error(ErrorCode::DimensionMismatch, "row index out of range");
    if (seen[static_cast<std::size_t>(r)]) throw Error(ErrorCode::OverlappingFolds, "row " + std::to_string(r));
  }
}

/// Fits the composition projection on train rows only and applies it to both partitions.
inline FoldResidual foldwise_residualize(const Matrix& x, const Matrix& z, const Fold& fold) {
  require_disjoint(fold, x.rows());
  const Matrix x_train = select_rows(x, fold.train);
  const Matrix z_train = select_rows(z, fold.train);
  const auto proj = fit_composition_projection(x_train, z_train);

  FoldResidual out;
  out.comp_train = proj.composition_part(z_train);
  out.geom_train = x_train - out.comp_train;
  const Matrix z_test = select_rows(z, fold.test);
  out.comp_test = proj.composition_part(z_test);
  out.geom_test = select_rows(x, fold.test) - out.comp_test;
  return out;
}

// ---------------------------------------------------------------------------
// Least-squares concept erasure.
//
// With W = Sigma_XX^{-1/2} (pseudo-inverse on the numerical range) and P the
// orthogonal projector onto col(W Sigma_XZ), the eraser is
//     x -> x - W^+ P W (x - mu_x).
// It zeroes the cross-covariance with Z and, among affine maps that do, moves
// points the least in the whitened metric.
// ---------------------------------------------------------------------------

struct Eraser {
  Vector mu_x;
  Vector mu_z;
  Matrix map;  // d x d, I - W^+ P W
};

inline Eraser leace_fit(const Matrix& x, const Matrix& z) {
  if (x.rows() != z.rows()) throw Error(ErrorCode::DimensionMismatch, "X and Z row counts differ");
  if (x.rows() <= z.cols() + 1) throw Error(ErrorCode::TooFewRows, "too few rows for concept erasure");
  const double n = static_cast<double>(x.rows());
  Eraser e;
  e.mu_x = x.colwise().mean().transpose();
  e.mu_z = z.colwise().mean().transpose();
  const Matrix xc = x.rowwise() - e.mu_x.transpose();
  const Matrix zc = z.rowwise() - e.mu_z.transpose();
  const Matrix sxx = (xc.transpose() * xc) / n;
  const Matrix sxz = (xc.transpose() * zc) / n;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(sxx);
  const Vector& lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff();
  if (!(lmax > 0.0)) throw Error(ErrorCode::DegenerateCovariance, "representation covariance is zero");

  const Index d = x.cols();
  Vector inv_sqrt = Vector::Zero(d);
  Vector sqrt_l = Vector::Zero(d);
  for (Index i = 0; i < d; ++i) {
    if (lambda(i) > kWhitenRcond * lmax) {
      inv_sqrt(i) = 1.0 / std::sqrt(lambda(i));
      sqrt_l(i) = std::sqrt(lambda(i));
    }
  }
  const Matrix& v = eig.eigenvectors();
  const Matrix whiten = v * inv_sqrt.asDiagonal() * v.transpose();
  const Matrix unwhiten = v * sqrt_l.asDiagonal() * v.transpose();

  const Matrix m = whiten * sxz;
  Matrix proj = Matrix::Zero(d, d);
  if (m.size() > 0) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    // Whitened cross-covariance is in units of std(Z); below this it is round-off.
    const double zscale = std::sqrt(std::max((zc.transpose() * zc / n).diagonal().maxCoeff(), 0.0));
    if (s.size() > 0 && s(0) > 1e-12 * std::max(zscale, 1e-300)) {
      Index rank = 0;
      while (rank < s.size() && s(rank) > kWhitenRcond * s(0)) ++rank;
      const auto u = svd.matrixU().leftCols(rank);
      proj = u * u.transpose();
    }
  }
  e.map = Matrix::Identity(d, d) - unwhiten * proj * whiten;
  return e;
}

inline Matrix leace_apply(const Eraser& e, const Matrix& x) {
  if (x.cols() != e.map.rows())
    throw Error(ErrorCode::DimensionMismatch, "eraser expects " + std::to_string(e.map.rows()) + " columns");
  const Matrix centered = x.rowwise() - e.mu_x.transpose();
  return (centered * e.map.transpose()).rowwise() + e.mu_x.transpose();
}

// ---------------------------------------------------------------------------

struct PcaProjection {
  Vector mean;
  Matrix components;         // d x dims, orthonormal columns
  Vector explained_variance;  // population variance along each component

  Matrix transform(const Matrix& x) const { return (x.rowwise() - mean.transpose()) * components; }
};

inline PcaProjection pca_fit(const Matrix& x, Index dims) {
  if (dims < 1 || dims > std::min(x.rows(), x.cols()))
    throw Error(ErrorCode::DimsTooLarge, std::to_string(dims) + " > min(n, d) = " +
                                             std::to_string(std::min(x.rows(), x.cols())));
  PcaProjection p;
  p.mean = x.colwise().mean().transpose();
  const Matrix xc = x.rowwise() - p.mean.transpose();
  Eigen::BDCSVD<Matrix> svd(xc, Eigen::ComputeThinV);
  p.components = svd.matrixV().leftCols(dims);
  p.explained_variance = svd.singularValues().head(dims).array().square() / static_cast<double>(x.rows());
  return p;
}

inline Matrix pca_project(const Matrix& x, Index dims) { return pca_fit(x, dims).transform(x); }

inline Matrix random_normal_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

/// Residual of X after projecting out a seeded random n x k subspace plus intercept.
inline Matrix random_subspace_residual(const Matrix& x, Index k, std::uint64_t seed) {
  if (k < 0 || k >= x.rows() - 1) throw Error(ErrorCode::TooFewRows, "random subspace needs k < n - 1");
  return ols_project(x, random_normal_matrix(x.rows(), k, seed)).x_geom;
}

// ---------------------------------------------------------------------------
// Equivariant channel slicing. Inside a block, channel c occupies columns
// [start_col + c*(2L+1), start_col + (c+1)*(2L+1)).

struct ChannelBlock {
  int order = 0;  // angular momentum L
  Index start_col = 0;
  Index num_channels = 0;

  Index components_per_channel() const { return 2 * order + 1; }
  Index width() const { return num_channels * components_per_channel(); }
};

struct ChannelLayout {
  std::vector<ChannelBlock> blocks;

  Index covered_columns() const { return blocks.empty() ? 0 : blocks.back().start_col + blocks.back().width(); }

  void validate() const {
    Index next = 0;
    for (const auto& b : blocks) {
      if (b.order < 0 || b.num_channels < 1)
        throw Error(ErrorCode::LayoutMismatch, "invalid block L=" + std::to_string(b.order));
      if (b.start_col != next)
        throw Error(ErrorCode::LayoutMismatch, "block L=" + std::to_string(b.order) + " starts at column " +
                                                   std::to_string(b.start_col) + ", expected " +
                                                   std::to_string(next));
      next += b.width();
    }
  }
};

inline ChannelLayout parse_channel_layout(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("blocks") || !j.at("blocks").is_array())
    throw Error(ErrorCode::SchemaViolation, "blocks");
  ChannelLayout layout;
  for (const auto& b : j.at("blocks")) {
    if (!b.contains("L") || !b.contains("start_col") || !b.contains("num_channels"))
      throw Error(ErrorCode::SchemaViolation, "blocks[]: L, start_col and num_channels are required");
    layout.blocks.push_back({b.at("L").get<int>(), b.at("start_col").get<Index>(), b.at("num_channels").get<Index>()});
  }
  layout.validate();
  return layout;
}

inline ChannelLayout load_channel_layout(const std::filesystem::path& path) {
  try {
    return parse_channel_layout(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("channel layout: ") + e.what());
  }
}

/// L = 0 blocks are returned verbatim; higher orders collapse each channel to its Euclidean norm.
inline Matrix slice_channels(const Matrix& x, const ChannelLayout& layout, int order) {
  layout.validate();
  if (layout.covered_columns() > x.cols())
    throw Error(ErrorCode::LayoutMismatch, "layout covers " + std::to_string(layout.covered_columns()) +
                                               " columns but X has " + std::to_string(x.cols()));
  std::vector<const ChannelBlock*> selected;
  Index out_cols = 0;
  for (const auto& b : layout.blocks) {
    if (b.order != order) continue;
    selected.push_back(&b);
    out_cols += order == 0 ? b.width() : b.num_channels;
  }
  if (selected.empty()) throw Error(ErrorCode::MissingOrder, "L=" + std::to_string(order));

  Matrix out(x.rows(), out_cols);
  Index col = 0;
  for (const auto* b : selected) {
    if (order == 0) {
      out.middleCols(col, b->width()) = x.middleCols(b->start_col, b->width());
      col += b->width();
      continue;
    }
    const Index m = b->components_per_channel();
    for (Index c = 0; c < b->num_channels; ++c, ++col)
      out.col(col) = x.middleCols(b->start_col + c * m, m).rowwise().norm();
  }
  return out;
}

}  // namespace probekit
