#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "probekit/compfeat.hpp"
#include "probekit/error.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/isomer.hpp"
#include "probekit/matrix.hpp"
#include "probekit/random.hpp"
#include "probekit/residual.hpp"
#include "probekit/stats.hpp"

namespace probekit {

/// One model's representation of the shared probe set.
struct ModelInput {
  std::string name;
  Matrix x;
  std::vector<std::string> formulas;
  TargetVector y;
  std::optional<std::string> regime;
};

struct RankComparison {
  std::vector<std::string> labels;
  std::vector<double> ranks_a, ranks_b;
  double rho = 0.0;
};

inline RankComparison compare_rankings(const std::vector<std::string>& labels, std::span<const double> a,
                                       std::span<const double> b) {
  if (labels.size() != a.size()) throw Error(ErrorCode::LengthMismatch, "one label per model");
  RankComparison out;
  out.labels = labels;
  out.ranks_a = average_ranks(a);
  out.ranks_b = average_ranks(b);
  out.rho = spearman_rho(a, b);
  return out;
}

inline Matrix composition_for(std::span<const std::string> formulas, CompositionSpec spec) {
  const auto molecules = parse_formulas(formulas);
  return build_composition(molecules, spec).z;
}

// ---------------------------------------------------------------------------

struct SweepPoint {
  Index n = 0;
  std::vector<ProbeReport> reports;  // one per model
  std::vector<double> r2_geom;       // seed means, one per model
  double rho = 0.0;                  // against the largest-N ranking
};

struct SweepResult {
  std::vector<std::string> models;
  std::vector<SweepPoint> points;  // ordered as the requested sizes
};

struct SweepOptions {
  int folds = 5;
  int seeds = 30;
  std::uint64_t base_seed = 0;
  std::uint64_t subset_seed = 0;
  CompositionSpec zspec = CompositionSpec::Z1;
  ProjectionMode mode = ProjectionMode::Foldwise;
  EvalOptions eval{};
};

/// Every model is evaluated on the first N rows of one seeded permutation, for each N.
inline SweepResult sample_efficiency_sweep(const std::vector<ModelInput>& models, std::span<const Index> sizes,
                                           const SweepOptions& opt = {}) {
  if (models.empty() || sizes.empty()) throw Error(ErrorCode::InvalidConfig, "sweep needs models and sizes");
  const Index n = models.front().x.rows();
  for (const auto& m : models)
    if (m.x.rows() != n) throw Error(ErrorCode::RowCountMismatch, m.name);
  const Index k = composition_width(opt.zspec);
  const Index largest = *std::max_element(sizes.begin(), sizes.end());
  if (largest > n) throw Error(ErrorCode::InvalidConfig, "sweep size " + std::to_string(largest) + " exceeds " + std::to_string(n) + " rows");

  const RowSet perm = permutation(n, opt.subset_seed);
  SweepResult out;
  for (const auto& m : models) out.models.push_back(m.name);
  for (Index size : sizes) {
    if (size < k + 2) throw Error(ErrorCode::TooFewRows, "N=" + std::to_string(size) + " is below k+2");
    const RowSet rows(perm.begin(), perm.begin() + size);
    SweepPoint point;
    point.n = size;
    const FoldPlan plan{size, opt.folds, opt.seeds, opt.base_seed};
    for (const auto& m : models) {
      std::vector<std::string> f;
      for (Index r : rows) f.push_back(m.formulas[static_cast<std::size_t>(r)]);
      const TargetVector y{m.y.name, select_rows(m.y.values, rows), m.y.units};
      auto report = run_cpd_evaluation(select_rows(m.x, rows), composition_for(f, opt.zspec), y, plan, opt.mode, opt.eval);
      point.r2_geom.push_back(report.r2_geom->summary.mean);
      point.reports.push_back(std::move(report));
    }
    out.points.push_back(std::move(point));
  }
  const auto top = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (auto& p : out.points)
    p.rho = models.size() >= 2 ? spearman_rho(p.r2_geom, out.points[top].r2_geom) : 1.0;
  return out;
}

// ---------------------------------------------------------------------------

struct BatteryOptions {
  int folds = 5;
  int seeds = 30;
  std::uint64_t seed = 0;
  EvalOptions eval{};
  int random_subspace_trials = 30;
  Index pca_dims = 128;
  int isomer_folds = 5;
  bool gbt_inflation = true;
  GbtConfig gbt{};
};

struct BatteryCheck {
  std::string name;
  std::optional<double> rho;  // empty for controls that do not produce a ranking
  std::string status = "ok";
  std::string message;
  std::vector<double> per_model_values;
};

struct BatteryReport {
  std::string target;
  std::vector<std::string> models;
  std::vector<std::optional<std::string>> regimes;
  std::vector<double> default_r2_geom;  // fold-wise Z1 CPD, the reference ranking
  std::vector<double> default_r2_comp;
  std::vector<BatteryCheck> checks;

  bool all_ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const BatteryCheck& c) { return c.status == "ok"; });
  }
};

/// Runs the robustness checks for one target across models. A failing check keeps its
/// error status and the remaining checks still run.
inline BatteryReport robustness_battery(const std::vector<ModelInput>& models, const BatteryOptions& opt = {}) {
  if (models.size() < 2) throw Error(ErrorCode::InvalidConfig, "the battery needs at least two models to rank");
  const std::string target = models.front().y.name;
  for (const auto& m : models) {
    if (m.y.name != target) throw Error(ErrorCode::InvalidConfig, "every model must use the same target");
    if (m.x.rows() != m.y.values.size() || static_cast<Index>(m.formulas.size()) != m.x.rows())
      throw Error(ErrorCode::RowCountMismatch, m.name);
  }

  BatteryReport rep;
  rep.target = target;
  for (const auto& m : models) {
    rep.models.push_back(m.name);
    rep.regimes.push_back(m.regime);
  }

  auto plan_for = [&](const ModelInput& m) { return FoldPlan{m.x.rows(), opt.folds, opt.seeds, opt.seed}; };
  auto geom_only = [&] {
    EvalOptions e = opt.eval;
    e.full = false;
    e.comp = false;
    e.geom = true;
    return e;
  };

  std::vector<Matrix> z1;
  for (const auto& m : models) z1.push_back(composition_for(m.formulas, CompositionSpec::Z1));
  {
    EvalOptions e = opt.eval;
    e.full = false;
    e.geom = true;
    e.comp = true;
    for (std::size_t i = 0; i < models.size(); ++i) {
      const auto r = run_cpd_evaluation(models[i].x, z1[i], models[i].y, plan_for(models[i]), ProjectionMode::Foldwise, e);
      rep.default_r2_geom.push_back(r.r2_geom->summary.mean);
      rep.default_r2_comp.push_back(r.r2_comp->summary.mean);
    }
  }

  auto run_check = [&](std::string name, bool ranked, auto&& per_model) {
    BatteryCheck c;
    c.name = std::move(name);
    try {
      for (std::size_t i = 0; i < models.size(); ++i) c.per_model_values.push_back(per_model(i));
      if (ranked) c.rho = spearman_rho(rep.default_r2_geom, c.per_model_values);
    } catch (const std::exception& e) {
      c.status = "error";
      c.message = e.what();
      c.rho.reset();
    }
    rep.checks.push_back(std::move(c));
  };

  auto geom_r2 = [&](std::size_t i, const Matrix& x, const Matrix& z, ProjectionMode mode, Residualizer r) {
    EvalOptions e = geom_only();
    e.residualizer = r;
    return run_cpd_evaluation(x, z, models[i].y, plan_for(models[i]), mode, e).r2_geom->summary.mean;
  };

  run_check("foldwise_vs_global", true, [&](std::size_t i) {
    return geom_r2(i, models[i].x, z1[i], ProjectionMode::Global, Residualizer::Cpd);
  });
  run_check("fwl_partial_r2", true, [&](std::size_t i) {
    return fwl_partial_r2(models[i].x, z1[i], models[i].y, plan_for(models[i]), opt.eval).summary.mean;
  });
  for (auto spec : {CompositionSpec::Z2, CompositionSpec::Z3, CompositionSpec::Z4}) {
    run_check("z1_vs_" + std::string(spec == CompositionSpec::Z2 ? "z2" : spec == CompositionSpec::Z3 ? "z3" : "z4"),
              true, [&](std::size_t i) {
                return geom_r2(i, models[i].x, composition_for(models[i].formulas, spec), ProjectionMode::Foldwise,
                               Residualizer::Cpd);
              });
  }
  run_check("cpd_vs_leace", true, [&](std::size_t i) {
    return geom_r2(i, models[i].x, z1[i], ProjectionMode::Global, Residualizer::Leace);
  });
  run_check("random_subspace_z", false, [&](std::size_t i) {
    return random_subspace_control(models[i].x, z1[i], models[i].y, opt.random_subspace_trials, plan_for(models[i]),
                                   mix_seed(opt.seed, 0x5eed + i), ProjectionMode::Foldwise, geom_only())
        .z;
  });
  if (opt.gbt_inflation) {
    run_check("gbt_inflation", false, [&](std::size_t i) {
      EvalOptions e = geom_only();
      e.probe = ProbeKind::Gbt;
      e.gbt = opt.gbt;
      FoldPlan one = plan_for(models[i]);
      one.seeds = 1;
      return run_cpd_evaluation(models[i].x, z1[i], models[i].y, one, ProjectionMode::Foldwise, e).r2_geom->summary.mean;
    });
  }
  run_check("pca_matched", true, [&](std::size_t i) {
    const Index dims = std::min({opt.pca_dims, models[i].x.cols(), models[i].x.rows()});
    return geom_r2(i, pca_project(models[i].x, dims), z1[i], ProjectionMode::Foldwise, Residualizer::Cpd);
  });
  run_check("isomer_geom_accuracy", true, [&](std::size_t i) {
    const auto dec = ols_project(models[i].x, z1[i]);
    IsomerOptions iso;
    iso.folds = opt.isomer_folds;
    return isomer_benchmark(dec.x_geom, dec.x_comp, models[i].formulas, models[i].y, opt.seed, iso).geom.mean_accuracy;
  });
  return rep;
}

}  // namespace probekit
