#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "probekit/compfeat.hpp"
#include "probekit/error.hpp"
#include "probekit/matrix.hpp"
#include "probekit/matrixio.hpp"
#include "probekit/random.hpp"

namespace probekit {

struct SyntheticConfig {
  Index n = 2000;
  Index d = 64;
  Index k = 6;
  double comp_share = 0.4;
  double geom_share = 0.4;
  double noise_share = 0.2;
  bool nonlinear_comp_leak = false;
  Index n_isomer_groups = 0;
  Index isomer_group_size = 8;
  double leak_scale = 4.0;
  double representation_noise = 0.1;
  std::uint64_t seed = 0;

  Index geometry_dim() const { return std::max<Index>(1, std::min<Index>(16, d / 4)); }

  void validate() const {
    const double shares[] = {comp_share, geom_share, noise_share};
    for (double s : shares)
      if (!(s >= 0.0) || !std::isfinite(s)) throw Error(ErrorCode::InvalidShares, "shares must be non-negative");
    if (std::abs(comp_share + geom_share + noise_share - 1.0) > 1e-12)
      throw Error(ErrorCode::InvalidShares, "comp_share + geom_share + noise_share must equal 1");
    if (k != 6) throw Error(ErrorCode::InvalidConfig, "synthetic composition uses the 6-column Z1 featurization");
    if (d <= k) throw Error(ErrorCode::InvalidConfig, "d must exceed k");
    if (n < 2 || n * 4 <= d) throw Error(ErrorCode::InvalidConfig, "n must exceed d/4");
    if (n_isomer_groups < 0 || isomer_group_size < 2 || n_isomer_groups * isomer_group_size > n)
      throw Error(ErrorCode::InvalidConfig, "isomer groups do not fit in n rows");
    if (nonlinear_comp_leak && d < 3 * k) throw Error(ErrorCode::InvalidConfig, "nonlinear leak needs d >= 3k");
    if (!(representation_noise >= 0.0) || !(leak_scale >= 0.0))
      throw Error(ErrorCode::InvalidConfig, "noise and leak scales must be non-negative");
  }
};

struct GroundTruth {
  Matrix z_std;  // column-standardized Z
  Matrix g;      // latent geometry, n x d_g
  Matrix b_comp; // k x d mixing of composition into X
  Matrix w_geom; // d_g x d mixing of geometry into X
  Vector comp_signal;  // unit-variance composition part of y
  Vector geom_signal;  // unit-variance geometry part of y
  Vector noise;
};

struct SyntheticData {
  SyntheticConfig config;
  Matrix x;
  Matrix z;
  std::vector<ElementCounts> molecules;
  std::vector<std::string> formulas;
  TargetVector y;
  TargetVector avg_mass;
  GroundTruth truth;
};

struct PlantedR2 {
  double comp = 0.0;
  double geom = 0.0;
  double tolerance = 0.0;
};

/// Expected seed-mean R^2 for composition and geometry, with tolerance max(0.03, 3/sqrt(n)).
inline PlantedR2 planted_r2(const SyntheticConfig& cfg) {
  cfg.validate();
  return {cfg.comp_share, cfg.geom_share, std::max(0.03, 3.0 / std::sqrt(static_cast<double>(cfg.n)))};
}

namespace detail {

inline ElementCounts random_formula(Rng& rng) {
  for (;;) {
    ElementCounts m;
    m.counts[0] = 1 + static_cast<int>(uniform_below(rng, 9));
    m.counts[1] = 1 + static_cast<int>(uniform_below(rng, 20));
    for (std::size_t e = 2; e < 5; ++e) m.counts[e] = static_cast<int>(uniform_below(rng, 4));
    if (m.total() <= 29) return m;
  }
}

inline Matrix normal_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = scale * dist(rng);
  return m;
}

/// Centers and scales to unit population variance; constant columns become zero.
inline Vector unit_variance(const Vector& v) {
  const double sd = std::sqrt(variance(v));
  Vector out = v.array() - v.mean();
  if (sd > 0.0) out /= sd;
  else out.setZero();
  return out;
}

inline Matrix standardize_columns(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Index c = 0; c < m.cols(); ++c) out.col(c) = unit_variance(m.col(c));
  return out;
}

/// exp(z), exp(-z), tanh(z) of every standardized composition column, each normalized.
inline Matrix leak_features(const Matrix& z_std) {
  Matrix out(z_std.rows(), 3 * z_std.cols());
  for (Index j = 0; j < z_std.cols(); ++j) {
    const auto col = z_std.col(j).array();
    out.col(3 * j) = unit_variance(col.exp().matrix());
    out.col(3 * j + 1) = unit_variance((-col).exp().matrix());
    out.col(3 * j + 2) = unit_variance(col.tanh().matrix());
  }
  return out;
}

}  // namespace detail

/// X = Zs B + G W + E and y = sqrt(c) comp + sqrt(g) geom + sqrt(e) noise with unit-variance parts,
/// so each share is the population R^2 of its component.
inline SyntheticData generate(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SyntheticData out;
  out.config = cfg;

  std::set<ElementCounts> used;
  for (Index g = 0; g < cfg.n_isomer_groups; ++g) {
    ElementCounts m = detail::random_formula(rng);
    while (used.contains(m)) m = detail::random_formula(rng);
    used.insert(m);
    for (Index r = 0; r < cfg.isomer_group_size; ++r) out.molecules.push_back(m);
  }
  while (static_cast<Index>(out.molecules.size()) < cfg.n) out.molecules.push_back(detail::random_formula(rng));
  for (const auto& m : out.molecules) out.formulas.push_back(format_formula(m));

  out.z = build_composition(out.molecules, CompositionSpec::Z1).z;
  auto& t = out.truth;
  t.z_std = detail::standardize_columns(out.z);
  const Index dg = cfg.geometry_dim();
  t.g = detail::normal_matrix(cfg.n, dg, rng);
  t.b_comp = detail::normal_matrix(cfg.k, cfg.d, rng, 1.0 / std::sqrt(static_cast<double>(cfg.k)));
  t.w_geom = detail::normal_matrix(dg, cfg.d, rng, 1.0 / std::sqrt(static_cast<double>(dg)));
  const Matrix e = detail::normal_matrix(cfg.n, cfg.d, rng, cfg.representation_noise);
  out.x = t.z_std * t.b_comp + t.g * t.w_geom + e;
  if (cfg.nonlinear_comp_leak) out.x.leftCols(3 * cfg.k) += cfg.leak_scale * detail::leak_features(t.z_std);

  const Vector a = detail::normal_matrix(cfg.k, 1, rng).col(0);
  const Vector b = detail::normal_matrix(dg, 1, rng).col(0);
  t.comp_signal = detail::unit_variance(t.z_std * a);
  t.geom_signal = t.g * b / b.norm();
  t.noise = detail::normal_matrix(cfg.n, 1, rng).col(0);
  out.y.name = "y";
  out.y.values = std::sqrt(cfg.comp_share) * t.comp_signal + std::sqrt(cfg.geom_share) * t.geom_signal +
                 std::sqrt(cfg.noise_share) * t.noise;

  out.avg_mass.name = "avg_mass";
  out.avg_mass.units = "u";
  out.avg_mass.values.resize(cfg.n);
  for (Index i = 0; i < cfg.n; ++i) out.avg_mass.values(i) = average_atomic_mass(out.molecules[static_cast<std::size_t>(i)]);
  return out;
}

/// Another representation of the same molecules whose geometry factor keeps only a fraction of the
/// planted one: G' = sqrt(f) G + sqrt(1 - f) N. A linear probe then reaches about f * geom_share.
inline Matrix synth_layer(const SyntheticData& data, double fidelity, std::uint64_t seed) {
  if (!(fidelity >= 0.0 && fidelity <= 1.0)) throw Error(ErrorCode::InvalidConfig, "fidelity must lie in [0, 1]");
  const auto& t = data.truth;
  Rng rng(seed);
  const Matrix fresh = detail::normal_matrix(t.g.rows(), t.g.cols(), rng);
  const Matrix g = std::sqrt(fidelity) * t.g + std::sqrt(1.0 - fidelity) * fresh;
  const Matrix e = detail::normal_matrix(data.x.rows(), data.x.cols(), rng, data.config.representation_noise);
  Matrix x = t.z_std * t.b_comp + g * t.w_geom + e;
  if (data.config.nonlinear_comp_leak) x.leftCols(3 * data.config.k) += data.config.leak_scale * detail::leak_features(t.z_std);
  return x;
}

/// Writes x.pmat, formulas.txt, y.pmat, avg_mass.pmat and manifest.json into dir. Extra layers are
/// stored as layer_<i>.pmat and listed before the final layer.
inline fs::path persist(const SyntheticData& data, const fs::path& dir, const std::string& model_id,
                        const std::vector<Matrix>& extra_layers = {}, std::optional<std::string> regime = {}) {
  fs::create_directories(dir);
  DatasetManifest m;
  m.model_id = model_id;
  m.regime = std::move(regime);
  for (std::size_t i = 0; i < extra_layers.size(); ++i) {
    const std::string file = "layer_" + std::to_string(i) + ".pmat";
    store_matrix(extra_layers[i], dir / file);
    m.layers.push_back({"layer_" + std::to_string(i), file, extra_layers[i].cols()});
  }
  store_matrix(data.x, dir / "x.pmat");
  m.layers.push_back({"final", "x.pmat", data.x.cols()});
  store_formulas(data.formulas, dir / "formulas.txt");
  m.formulas_path = "formulas.txt";
  for (const TargetVector* t : {&data.y, &data.avg_mass}) {
    store_matrix(Matrix(t->values), dir / (t->name + ".pmat"));
    m.targets.push_back({t->name, t->name + ".pmat", t->units});
  }
  const auto path = dir / "manifest.json";
  store_manifest(m, path);
  return path;
}

}  // namespace probekit
