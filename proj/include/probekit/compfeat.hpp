#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/error.hpp"
#include "probekit/matrix.hpp"

namespace probekit {

/// The five-element alphabet in feature-column order.
inline constexpr std::array<std::string_view, 5> kElements{"C", "H", "N", "O", "F"};

/// Conventional atomic masses (u), parallel to kElements.
inline constexpr std::array<double, 5> kAtomicMass{12.011, 1.008, 14.007, 15.999, 18.998};

struct ElementCounts {
  std::array<int, 5> counts{};

  int total() const {
    int t = 0;
    for (int c : counts) t += c;
    return t;
  }

  int operator[](std::size_t e) const { return counts[e]; }

  friend bool operator==(const ElementCounts&, const ElementCounts&) = default;
  friend auto operator<=>(const ElementCounts&, const ElementCounts&) = default;
};

enum class CompositionSpec {
  Z1,  // element fractions + standardized atom count
  Z2,  // raw element counts + raw atom count
  Z3,  // element fractions only
  Z4,  // binary presence + standardized atom count
};

inline Index composition_width(CompositionSpec spec) { return spec == CompositionSpec::Z3 ? 5 : 6; }

inline std::optional<CompositionSpec> parse_composition_spec(std::string_view s) {
  if (s == "Z1") return CompositionSpec::Z1;
  if (s == "Z2") return CompositionSpec::Z2;
  if (s == "Z3") return CompositionSpec::Z3;
  if (s == "Z4") return CompositionSpec::Z4;
  return std::nullopt;
}

inline std::string_view to_string(CompositionSpec spec) {
  switch (spec) {
    case CompositionSpec::Z1: return "Z1";
    case CompositionSpec::Z2: return "Z2";
    case CompositionSpec::Z3: return "Z3";
    case CompositionSpec::Z4: return "Z4";
  }
  return "Z1";
}

/// Parses Hill-style element-count strings such as "C2H6O". Repeated symbols accumulate.
inline ElementCounts parse_formula(std::string_view s) {
  ElementCounts out;
  std::size_t i = 0;
  if (s.empty()) throw Error(ErrorCode::EmptyFormula, "empty formula");
  while (i < s.size()) {
    if (!std::isupper(static_cast<unsigned char>(s[i])))
      throw Error(ErrorCode::MalformedToken, "position " + std::to_string(i) + " in '" + std::string(s) + "'");
    std::size_t j = i + 1;
    while (j < s.size() && std::islower(static_cast<unsigned char>(s[j]))) ++j;
    const std::string_view symbol = s.substr(i, j - i);
    std::size_t e = 0;
    while (e < kElements.size() && kElements[e] != symbol) ++e;
    if (e == kElements.size()) throw Error(ErrorCode::UnknownElement, std::string(symbol));

    const std::size_t digits_at = j;
    long count = 0;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
      count = count * 10 + (s[j] - '0');
      if (count > 1'000'000) throw Error(ErrorCode::MalformedToken, "position " + std::to_string(digits_at));
      ++j;
    }
    if (j == digits_at) count = 1;
    if (count == 0) throw Error(ErrorCode::MalformedToken, "position " + std::to_string(digits_at));
    out.counts[e] += static_cast<int>(count);
    i = j;
  }
  return out;
}

/// Hill order: C, H, then the rest alphabetically (F, N, O).
inline std::string format_formula(const ElementCounts& m) {
  std::string out;
  for (std::size_t e : {0u, 1u, 4u, 2u, 3u}) {
    if (m.counts[e] == 0) continue;
    out += kElements[e];
    if (m.counts[e] > 1) out += std::to_string(m.counts[e]);
  }
  return out;
}

inline std::vector<ElementCounts> parse_formulas(std::span<const std::string> lines) {
  std::vector<ElementCounts> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(parse_formula(l));
  return out;
}

struct CompositionMatrix {
  Matrix z;
  /// Set when the standardized atom-count column could not be z-scored and was zeroed.
  bool degenerate_atom_count = false;
};

inline CompositionMatrix build_composition(std::span<const ElementCounts> molecules, CompositionSpec spec) {
  if (molecules.empty()) throw Error(ErrorCode::TooFewRows, "no molecules to featurize");
  const auto n = static_cast<Index>(molecules.size());
  CompositionMatrix out;
  out.z.setZero(n, composition_width(spec));

  Vector totals(n);
  for (Index i = 0; i < n; ++i) {
    const auto& m = molecules[static_cast<std::size_t>(i)];
    const double total = m.total();
    totals(i) = total;
    for (Index e = 0; e < 5; ++e) {
      const double c = m.counts[static_cast<std::size_t>(e)];
      switch (spec) {
        case CompositionSpec::Z1:
        case CompositionSpec::Z3: out.z(i, e) = c / total; break;
        case CompositionSpec::Z2: out.z(i, e) = c; break;
        case CompositionSpec::Z4: out.z(i, e) = c > 0 ? 1.0 : 0.0; break;
      }
    }
  }

  if (spec == CompositionSpec::Z2) {
    out.z.col(5) = totals;
  } else if (spec == CompositionSpec::Z1 || spec == CompositionSpec::Z4) {
    const double mean = totals.mean();
    const double sd = std::sqrt(variance(totals));
    if (n < 2 || sd <= 0.0) {
      out.degenerate_atom_count = n >= 2;
      out.z.col(5).setZero();
    } else {
      out.z.col(5) = (totals.array() - mean) / sd;
    }
  }
  return out;
}

inline double average_atomic_mass(const ElementCounts& m) {
  double sum = 0.0;
  for (std::size_t e = 0; e < 5; ++e) sum += m.counts[e] * kAtomicMass[e];
  return sum / m.total();
}

}  // namespace probekit
