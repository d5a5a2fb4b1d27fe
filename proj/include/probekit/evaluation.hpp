#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/error.hpp"
#include "probekit/matrix.hpp"
#include "probekit/parallel.hpp"
#include "probekit/probes/gbt.hpp"
#include "probekit/probes/metrics.hpp"
#include "probekit/probes/mlp.hpp"
#include "probekit/probes/ridge.hpp"
#include "probekit/random.hpp"
#include "probekit/residual.hpp"
#include "probekit/stats.hpp"

namespace probekit {

/// Seeded K-fold x S-seed schedule. Seed index s shuffles rows with (base_seed + s) * 100 + 7.
struct FoldPlan {
  Index n = 0;
  int folds = 5;
  int seeds = 30;
  std::uint64_t base_seed = 0;

  std::uint64_t shuffle_seed(int s) const { return (base_seed + static_cast<std::uint64_t>(s)) * 100 + 7; }

  void validate() const {
    if (folds < 2 || seeds < 1) throw Error(ErrorCode::InvalidConfig, "need folds >= 2 and seeds >= 1");
    if (n < folds) throw Error(ErrorCode::TooFewRows, std::to_string(n) + " rows for " + std::to_string(folds) + " folds");
  }

  /// Shuffled contiguous split; the first n % K folds get one extra row.
  std::vector<Fold> folds_for_seed(int s) const {
    validate();
    const RowSet perm = permutation(n, shuffle_seed(s));
    std::vector<Fold> out(static_cast<std::size_t>(folds));
    Index start = 0;
    for (int f = 0; f < folds; ++f) {
      const Index size = n / folds + (f < n % folds ? 1 : 0);
      auto& fold = out[static_cast<std::size_t>(f)];
      fold.test.assign(perm.begin() + start, perm.begin() + start + size);
      fold.train.reserve(static_cast<std::size_t>(n - size));
      fold.train.insert(fold.train.end(), perm.begin(), perm.begin() + start);
      fold.train.insert(fold.train.end(), perm.begin() + start + size, perm.end());
      start += size;
    }
    return out;
  }
};

enum class ProjectionMode { Foldwise, Global };
enum class Residualizer { Cpd, Leace };
enum class ProbeKind { Ridge, Gbt, Mlp };

inline std::string_view to_string(ProjectionMode m) { return m == ProjectionMode::Foldwise ? "foldwise" : "global"; }
inline std::string_view to_string(Residualizer r) { return r == Residualizer::Cpd ? "cpd" : "leace"; }
inline std::string_view to_string(ProbeKind p) {
  switch (p) {
    case ProbeKind::Ridge: return "ridge";
    case ProbeKind::Gbt: return "gbt";
    case ProbeKind::Mlp: return "mlp";
  }
  return "ridge";
}

struct EvalOptions {
  std::vector<double> alpha_grid = default_alpha_grid();
  Residualizer residualizer = Residualizer::Cpd;
  ProbeKind probe = ProbeKind::Ridge;
  GbtConfig gbt{};
  MlpConfig mlp{};
  bool fit_intercept = true;
  bool full = true;
  bool geom = true;
  bool comp = true;
  int threads = 1;
};

struct ComponentScores {
  Summary summary;                                // across seed-level means
  std::vector<double> per_seed;                   // mean over folds
  std::vector<std::vector<double>> per_fold;      // [seed][fold]
  std::vector<std::vector<double>> chosen_alpha;  // [seed][fold], ridge only
};

struct ProbeReport {
  std::string target_name;
  ProjectionMode mode = ProjectionMode::Foldwise;
  Residualizer residualizer = Residualizer::Cpd;
  ProbeKind probe = ProbeKind::Ridge;
  std::optional<ComponentScores> r2_full;
  std::optional<ComponentScores> r2_geom;
  std::optional<ComponentScores> r2_comp;
};

namespace detail {

struct Split {
  Matrix full_train, full_test, geom_train, geom_test, comp_train, comp_test;
};

inline double probe_score(const Matrix& x_train, const Vector& y_train, const Matrix& x_test, const Vector& y_test,
                          const EvalOptions& opt, std::uint64_t task_seed, double* alpha_out) {
  Vector pred;
  switch (opt.probe) {
    case ProbeKind::Ridge: {
      const auto model = ridge_cv_select(x_train, y_train, opt.alpha_grid, opt.fit_intercept);
      if (alpha_out) *alpha_out = model.alpha;
      pred = model.predict(x_test);
      break;
    }
    case ProbeKind::Gbt: pred = gbt_probe(x_train, y_train, x_test, opt.gbt); break;
    case ProbeKind::Mlp: {
      MlpConfig cfg = opt.mlp;
      cfg.seed = mix_seed(opt.mlp.seed, task_seed);
      pred = mlp_probe(x_train, y_train, x_test, cfg);
      break;
    }
  }
  return r2_score(y_test, pred);
}

/// Geometric / compositional parts for a fold, fitted on train rows only.
inline void residualize_fold(const Matrix& x, const Matrix& z, const Fold& fold, Residualizer r, Split& s) {
  if (r == Residualizer::Cpd) {
    auto res = foldwise_residualize(x, z, fold);
    s.geom_train = std::move(res.geom_train);
    s.geom_test = std::move(res.geom_test);
    s.comp_train = std::move(res.comp_train);
    s.comp_test = std::move(res.comp_test);
    return;
  }
  require_disjoint(fold, x.rows());
  const auto eraser = leace_fit(s.full_train, select_rows(z, fold.train));
  s.geom_train = leace_apply(eraser, s.full_train);
  s.geom_test = leace_apply(eraser, s.full_test);
  s.comp_train = s.full_train - s.geom_train;
  s.comp_test = s.full_test - s.geom_test;
}

inline void finalize(ComponentScores& c) {
  c.per_seed.clear();
  for (const auto& folds : c.per_fold) c.per_seed.push_back(summarize(folds).mean);
  c.summary = summarize(c.per_seed);
}

}  // namespace detail

/// Seeded cross-validated probing of X, its geometric residual and its compositional part.
inline ProbeReport run_cpd_evaluation(const Matrix& x, const Matrix& z, const TargetVector& y, const FoldPlan& plan,
                                      ProjectionMode mode, const EvalOptions& opt = {}) {
  if (x.rows() != z.rows() || x.rows() != y.values.size() || plan.n != x.rows())
    throw Error(ErrorCode::DimensionMismatch, "X, Z, y and the fold plan must agree on row count");
  plan.validate();

  std::optional<Matrix> global_geom, global_comp;
  if (mode == ProjectionMode::Global && (opt.geom || opt.comp)) {
    if (opt.residualizer == Residualizer::Cpd) {
      auto dec = ols_project(x, z);
      global_geom = std::move(dec.x_geom);
      global_comp = std::move(dec.x_comp);
    } else {
      global_geom = leace_apply(leace_fit(x, z), x);
      global_comp = x - *global_geom;
    }
  }

  const auto seeds = static_cast<std::size_t>(plan.seeds);
  const auto k = static_cast<std::size_t>(plan.folds);
  auto make = [&] {
    ComponentScores c;
    c.per_fold.assign(seeds, std::vector<double>(k, 0.0));
    if (opt.probe == ProbeKind::Ridge) c.chosen_alpha.assign(seeds, std::vector<double>(k, 0.0));
    return c;
  };
  ComponentScores full = make(), geom = make(), comp = make();
  auto alpha_slot = [](ComponentScores& c, std::size_t s, std::size_t f) {
    return c.chosen_alpha.empty() ? nullptr : &c.chosen_alpha[s][f];
  };

  parallel_for(seeds, opt.threads, [&](std::size_t s) {
    const auto folds = plan.folds_for_seed(static_cast<int>(s));
    for (std::size_t f = 0; f < k; ++f) {
      const Fold& fold = folds[f];
      const Vector y_train = select_rows(y.values, fold.train);
      const Vector y_test = select_rows(y.values, fold.test);
      if (!(variance(y_test) > 0.0))
        throw Error(ErrorCode::ZeroVarianceFold, "seed " + std::to_string(s) + " fold " + std::to_string(f));
      const std::uint64_t task = mix_seed(plan.shuffle_seed(static_cast<int>(s)), f);

      detail::Split sp;
      sp.full_train = select_rows(x, fold.train);
      sp.full_test = select_rows(x, fold.test);
      if (opt.geom || opt.comp) {
        if (mode == ProjectionMode::Global) {
          sp.geom_train = select_rows(*global_geom, fold.train);
          sp.geom_test = select_rows(*global_geom, fold.test);
          sp.comp_train = select_rows(*global_comp, fold.train);
          sp.comp_test = select_rows(*global_comp, fold.test);
        } else {
          detail::residualize_fold(x, z, fold, opt.residualizer, sp);
        }
      }
      if (opt.full)
        full.per_fold[s][f] = detail::probe_score(sp.full_train, y_train, sp.full_test, y_test, opt, task,
                                                  alpha_slot(full, s, f));
      if (opt.geom)
        geom.per_fold[s][f] = detail::probe_score(sp.geom_train, y_train, sp.geom_test, y_test, opt, task + 1,
                                                  alpha_slot(geom, s, f));
      if (opt.comp)
        comp.per_fold[s][f] = detail::probe_score(sp.comp_train, y_train, sp.comp_test, y_test, opt, task + 2,
                                                  alpha_slot(comp, s, f));
    }
  });

  ProbeReport report;
  report.target_name = y.name;
  report.mode = mode;
  report.residualizer = opt.residualizer;
  report.probe = opt.probe;
  auto emit = [](bool on, ComponentScores& c, std::optional<ComponentScores>& dst) {
    if (!on) return;
    detail::finalize(c);
    dst = std::move(c);
  };
  emit(opt.full, full, report.r2_full);
  emit(opt.geom, geom, report.r2_geom);
  emit(opt.comp, comp, report.r2_comp);
  return report;
}

// ---------------------------------------------------------------------------
// Frisch-Waugh-Lovell partial R^2

/// OLS coefficients of the composition-residualized target on the residualized representation.
inline Vector fwl_coefficients(const Matrix& x, const Matrix& z, const Vector& y) {
  Matrix stacked(x.rows(), x.cols() + 1);
  stacked.leftCols(x.cols()) = x;
  stacked.col(x.cols()) = y;
  const Matrix resid = ols_project(stacked, z).x_geom;
  return lstsq(resid.leftCols(x.cols()), resid.col(x.cols()));
}

struct FwlReport {
  Summary summary;
  std::vector<double> per_seed;
  std::vector<std::vector<double>> per_fold;
};

/// Residualizes X and y against [1 Z] on train rows, ridge-probes the residual problem and
/// scores R^2 against the residualized held-out target.
inline FwlReport fwl_partial_r2(const Matrix& x, const Matrix& z, const TargetVector& y, const FoldPlan& plan,
                                const EvalOptions& opt = {}) {
  if (x.rows() != z.rows() || x.rows() != y.values.size() || plan.n != x.rows())
    throw Error(ErrorCode::DimensionMismatch, "X, Z, y and the fold plan must agree on row count");
  plan.validate();
  const double total_var = variance(y.values);
  const auto seeds = static_cast<std::size_t>(plan.seeds);
  const auto k = static_cast<std::size_t>(plan.folds);

  FwlReport out;
  out.per_fold.assign(seeds, std::vector<double>(k, 0.0));
  parallel_for(seeds, opt.threads, [&](std::size_t s) {
    const auto folds = plan.folds_for_seed(static_cast<int>(s));
    for (std::size_t f = 0; f < k; ++f) {
      const auto& fold = folds[f];
      Matrix stacked(x.rows(), x.cols() + 1);
      stacked.leftCols(x.cols()) = x;
      stacked.col(x.cols()) = y.values;
      const auto res = foldwise_residualize(stacked, z, fold);
      const Index d = x.cols();
      const Vector y_train = res.geom_train.col(d);
      const Vector y_test = res.geom_test.col(d);
      if (!(variance(y_train) > 1e-12 * total_var))
        throw Error(ErrorCode::ZeroResidualVariance, "composition explains the target exactly");
      const auto model = ridge_cv_select(res.geom_train.leftCols(d), y_train, opt.alpha_grid);
      out.per_fold[s][f] = r2_score(y_test, model.predict(res.geom_test.leftCols(d)));
    }
  });
  for (const auto& folds : out.per_fold) out.per_seed.push_back(summarize(folds).mean);
  out.summary = summarize(out.per_seed);
  return out;
}

// ---------------------------------------------------------------------------

struct RandomSubspaceResult {
  double actual = 0.0;
  double null_mean = 0.0;
  double null_std = 0.0;  // sample standard deviation
  double z = 0.0;
  std::vector<double> null_values;
};

/// z-score of the actual R^2_geom against residualization by seeded random n x k subspaces.
inline RandomSubspaceResult random_subspace_control(const Matrix& x, const Matrix& z, const TargetVector& y, int trials,
                                                    const FoldPlan& plan, std::uint64_t seed,
                                                    ProjectionMode mode = ProjectionMode::Foldwise,
                                                    EvalOptions opt = {}) {
  if (trials < 30) throw Error(ErrorCode::InvalidConfig, "random subspace control needs at least 30 trials");
  opt.full = false;
  opt.comp = false;
  opt.geom = true;
  opt.residualizer = Residualizer::Cpd;

  RandomSubspaceResult out;
  out.actual = run_cpd_evaluation(x, z, y, plan, mode, opt).r2_geom->summary.mean;
  out.null_values.resize(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    const Matrix zr = random_normal_matrix(x.rows(), z.cols(), mix_seed(seed, static_cast<std::uint64_t>(t)));
    out.null_values[static_cast<std::size_t>(t)] = run_cpd_evaluation(x, zr, y, plan, mode, opt).r2_geom->summary.mean;
  }
  const Vector nv = from_std(out.null_values);
  out.null_mean = nv.mean();
  out.null_std = std::sqrt((nv.array() - out.null_mean).square().sum() / static_cast<double>(trials - 1));
  if (out.null_std < 1e-12) throw Error(ErrorCode::DegenerateNull, "null R^2 distribution has zero spread");
  out.z = (out.actual - out.null_mean) / out.null_std;
  return out;
}

// ---------------------------------------------------------------------------

struct ShapStability {
  double mean_rho = 0.0;
  std::vector<double> per_bootstrap;
};

/// Exact linear-model SHAP magnitudes: mean over rows of |w_j (x_j - mean_j)|.
inline Vector linear_shap_importance(const RidgeModel& model, const Matrix& x) {
  const Matrix centered = center_columns(x);
  return (centered.array().rowwise() * model.weights.transpose().array()).abs().colwise().mean().transpose();
}

/// Bootstrap resamples are split in halves; each half gets its own ridge probe and importance
/// ranking, and the Spearman correlation between halves is averaged over resamples.
inline ShapStability shap_stability(const Matrix& x_geom, const Vector& y, int bootstraps, std::uint64_t seed,
                                    const std::vector<double>& grid = default_alpha_grid()) {
  if (bootstraps < 2) throw Error(ErrorCode::InvalidConfig, "shap_stability needs at least 2 bootstraps");
  if (x_geom.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "shap_stability");
  const Index n = x_geom.rows();
  if (n < 6) throw Error(ErrorCode::TooFewRows, "shap_stability needs at least 6 rows");
  ShapStability out;
  for (int b = 0; b < bootstraps; ++b) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(b)));
    RowSet sample(static_cast<std::size_t>(n));
    for (auto& r : sample) r = static_cast<Index>(uniform_below(rng, static_cast<std::uint64_t>(n)));
    const std::size_t half = sample.size() / 2;
    const RowSet a(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(half));
    const RowSet c(sample.begin() + static_cast<std::ptrdiff_t>(half), sample.end());
    auto importance = [&](const RowSet& rows) {
      const Matrix xs = select_rows(x_geom, rows);
      const Vector ys = select_rows(y, rows);
      return to_std(linear_shap_importance(ridge_cv_select(xs, ys, grid), xs));
    };
    double rho = 0.0;
    try {
      rho = spearman_rho(importance(a), importance(c));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConstantInput) throw;
    }
    out.per_bootstrap.push_back(rho);
  }
  out.mean_rho = summarize(out.per_bootstrap).mean;
  return out;
}

}  // namespace probekit
