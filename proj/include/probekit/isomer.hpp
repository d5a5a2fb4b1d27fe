#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "probekit/compfeat.hpp"
#include "probekit/error.hpp"
#include "probekit/matrix.hpp"
#include "probekit/probes/logistic.hpp"
#include "probekit/random.hpp"

namespace probekit {

struct IsomerIndex {
  struct Group {
    std::string formula;
    RowSet rows;  // ascending
  };
  struct Pair {
    Index i = 0;
    Index j = 0;    // i < j
    int sign = 1;   // +1: feature X[i] - X[j]; -1: X[j] - X[i]
    bool tied = false;
  };
  std::vector<Group> groups;
  std::vector<Pair> pairs;

  Index first(const Pair& p) const { return p.sign > 0 ? p.i : p.j; }
  Index second(const Pair& p) const { return p.sign > 0 ? p.j : p.i; }
};

inline constexpr double kIsomerTieTolerance = 1e-12;

/// Groups rows with identical element counts and enumerates every within-group pair.
///
/// Without a target, a seeded half of the pairs gets sign +1. With a target, pairs whose values
/// differ by less than kIsomerTieTolerance are marked tied, and the rest are oriented so that a
/// seeded half have the higher-valued molecule first. Either way the split is balanced within 1.
inline IsomerIndex build_isomer_index(std::span<const ElementCounts> molecules, std::uint64_t seed,
                                      const Vector* y = nullptr) {
  if (y != nullptr && y->size() != static_cast<Index>(molecules.size()))
    throw Error(ErrorCode::LengthMismatch, "isomer target length differs from molecule count");
  std::map<ElementCounts, RowSet> by_counts;
  for (std::size_t r = 0; r < molecules.size(); ++r) by_counts[molecules[r]].push_back(static_cast<Index>(r));

  IsomerIndex idx;
  for (auto& [counts, rows] : by_counts) {
    if (rows.size() < 2) continue;
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        IsomerIndex::Pair p{rows[a], rows[b], 1, false};
        if (y != nullptr) p.tied = std::abs((*y)(p.i) - (*y)(p.j)) < kIsomerTieTolerance;
        idx.pairs.push_back(p);
      }
    idx.groups.push_back({format_formula(counts), std::move(rows)});
  }
  if (idx.groups.empty()) throw Error(ErrorCode::NoIsomerGroups, "no two molecules share element counts");

  RowSet live;
  for (std::size_t p = 0; p < idx.pairs.size(); ++p)
    if (!idx.pairs[p].tied) live.push_back(static_cast<Index>(p));
  Rng rng(seed);
  shuffle_in_place(live, rng);
  for (std::size_t r = 0; r < live.size(); ++r) {
    auto& p = idx.pairs[static_cast<std::size_t>(live[r])];
    const bool forward = r < (live.size() + 1) / 2;
    if (y == nullptr) {
      p.sign = forward ? 1 : -1;
    } else {
      const bool i_higher = (*y)(p.i) > (*y)(p.j);
      p.sign = (forward == i_higher) ? 1 : -1;
    }
  }
  return idx;
}

inline IsomerIndex build_isomer_index(std::span<const std::string> formulas, std::uint64_t seed,
                                      const Vector* y = nullptr) {
  const auto molecules = parse_formulas(formulas);
  return build_isomer_index(molecules, seed, y);
}

struct IsomerResult {
  LogisticCvResult geom;
  LogisticCvResult comp;
  std::size_t groups = 0;
  std::size_t pairs = 0;
  std::size_t ties_dropped = 0;
};

struct IsomerOptions {
  int folds = 5;
  LogisticCvOptions logistic{};
};

/// Pairwise ordering benchmark: logistic probes on signed within-group differences predict which
/// molecule has the higher target, once from the geometric and once from the compositional part.
inline IsomerResult isomer_benchmark(const Matrix& x_geom, const Matrix& x_comp, std::span<const std::string> formulas,
                                     const TargetVector& y, std::uint64_t seed, const IsomerOptions& opt = {}) {
  const auto n = static_cast<Index>(formulas.size());
  if (x_geom.rows() != n || x_comp.rows() != n || y.values.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "isomer inputs must share a row count");
  const auto idx = build_isomer_index(formulas, seed, &y.values);

  IsomerResult out;
  out.groups = idx.groups.size();
  std::vector<const IsomerIndex::Pair*> used;
  for (const auto& p : idx.pairs) {
    if (p.tied) ++out.ties_dropped;
    else used.push_back(&p);
  }
  out.pairs = used.size();
  if (used.size() < 2 * static_cast<std::size_t>(opt.folds))
    throw Error(ErrorCode::TooFewRows, "only " + std::to_string(used.size()) + " untied isomer pairs");

  Labels labels;
  Matrix dg(static_cast<Index>(used.size()), x_geom.cols());
  Matrix dc(static_cast<Index>(used.size()), x_comp.cols());
  for (std::size_t r = 0; r < used.size(); ++r) {
    const Index a = idx.first(*used[r]);
    const Index b = idx.second(*used[r]);
    dg.row(static_cast<Index>(r)) = x_geom.row(a) - x_geom.row(b);
    dc.row(static_cast<Index>(r)) = x_comp.row(a) - x_comp.row(b);
    labels.push_back(y.values(a) > y.values(b) ? 1 : 0);
  }
  const auto folds = stratified_folds(labels, opt.folds, mix_seed(seed, 1));
  LogisticCvOptions lopt = opt.logistic;
  lopt.seed = mix_seed(seed, 2);
  out.geom = logistic_cv_probe(dg, labels, folds, lopt);
  out.comp = logistic_cv_probe(dc, labels, folds, lopt);
  return out;
}

}  // namespace probekit
