#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probekit/battery.hpp"
#include "probekit/error.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/isomer.hpp"
#include "probekit/matrixio.hpp"
#include "probekit/svg.hpp"

namespace probekit {

using nlohmann::json;

namespace detail {

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

inline double as_number(const json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

inline std::string cell(const json& j) { return j.is_number() ? csv::format_double(j.get<double>()) : std::string(); }

inline std::string csv_text(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline json component_json(const ComponentScores& c, ProbeKind probe) {
  json j{{"mean", number_or_null(c.summary.mean)}, {"std", number_or_null(c.summary.std)}, {"per_seed", numbers(c.per_seed)}};
  if (probe == ProbeKind::Ridge) {
    json a = json::array();
    for (const auto& s : c.chosen_alpha) a.push_back(numbers(s));
    j["chosen_alpha"] = std::move(a);
  }
  return j;
}

inline json logistic_json(const LogisticCvResult& r) {
  return {{"mean_accuracy", r.mean_accuracy}, {"std_accuracy", r.std_accuracy}, {"fold_accuracy", numbers(r.fold_accuracy)},
          {"chosen_c", numbers(r.chosen_c)}};
}

}  // namespace detail

struct ReportContext {
  std::string model;
  std::string zspec = "Z1";
  std::string fingerprint;
  int folds = 5;
  int seeds = 30;
};

inline json probe_report_json(const ProbeReport& r, const ReportContext& ctx) {
  json j{{"kind", "probe"},
         {"model", ctx.model},
         {"target", r.target_name},
         {"mode", std::string(to_string(r.mode))},
         {"residualizer", std::string(to_string(r.residualizer))},
         {"probe", std::string(to_string(r.probe))},
         {"zspec", ctx.zspec},
         {"folds", ctx.folds},
         {"seeds", ctx.seeds},
         {"config_fingerprint", ctx.fingerprint}};
  j["r2_full"] = r.r2_full ? detail::component_json(*r.r2_full, r.probe) : json(nullptr);
  j["r2_geom"] = r.r2_geom ? detail::component_json(*r.r2_geom, r.probe) : json(nullptr);
  j["r2_comp"] = r.r2_comp ? detail::component_json(*r.r2_comp, r.probe) : json(nullptr);
  return j;
}

inline json battery_json(const BatteryReport& b, const std::string& fingerprint) {
  json models = json::array();
  for (std::size_t i = 0; i < b.models.size(); ++i)
    models.push_back({{"name", b.models[i]},
                      {"regime", b.regimes[i] ? json(*b.regimes[i]) : json(nullptr)},
                      {"r2_geom", detail::number_or_null(b.default_r2_geom[i])},
                      {"r2_comp", detail::number_or_null(b.default_r2_comp[i])}});
  json checks = json::array();
  for (const auto& c : b.checks) {
    json cj{{"name", c.name},
            {"rho", c.rho ? detail::number_or_null(*c.rho) : json(nullptr)},
            {"status", c.status},
            {"per_model_values", detail::numbers(c.per_model_values)}};
    if (!c.message.empty()) cj["message"] = c.message;
    checks.push_back(std::move(cj));
  }
  return {{"kind", "battery"}, {"target", b.target}, {"config_fingerprint", fingerprint}, {"models", models}, {"checks", checks}};
}

inline json isomer_json(const IsomerResult& r, const std::string& model, const std::string& target) {
  return {{"kind", "isomer"},
          {"model", model},
          {"target", target},
          {"groups", r.groups},
          {"pairs", r.pairs},
          {"ties_dropped", r.ties_dropped},
          {"geom", detail::logistic_json(r.geom)},
          {"comp", detail::logistic_json(r.comp)}};
}

inline json sweep_json(const SweepResult& s, const std::string& target, const std::string& fingerprint) {
  json points = json::array();
  for (const auto& p : s.points) points.push_back({{"n", p.n}, {"r2_geom", detail::numbers(p.r2_geom)}, {"rho", p.rho}});
  return {{"kind", "sweep"}, {"target", target}, {"config_fingerprint", fingerprint}, {"models", s.models}, {"points", points}};
}

// ---------------------------------------------------------------------------
// Rendering from report JSON, shared by the commands and `report`.

/// CSV with one row per model / check / layer / sweep size depending on the report kind.
inline std::string render_csv(const json& j) {
  const std::string kind = j.value("kind", "");
  std::string out;
  auto mean_of = [](const json& c) { return c.is_object() ? detail::cell(c.at("mean")) : std::string(); };
  auto std_of = [](const json& c) { return c.is_object() ? detail::cell(c.at("std")) : std::string(); };
  if (kind == "probe") {
    out = "model,R2_full,R2_geom,R2_geom_std,R2_comp\n";
    out += detail::csv_text(j.at("model")) + "," + mean_of(j.at("r2_full")) + "," + mean_of(j.at("r2_geom")) + "," +
           std_of(j.at("r2_geom")) + "," + mean_of(j.at("r2_comp")) + "\n";
  } else if (kind == "battery") {
    out = "check,rho,status\n";
    for (const auto& c : j.at("checks"))
      out += detail::csv_text(c.at("name")) + "," + detail::cell(c.at("rho")) + "," + c.at("status").get<std::string>() + "\n";
    out += "\nmodel,regime,R2_geom,R2_comp\n";
    for (const auto& m : j.at("models"))
      out += detail::csv_text(m.at("name")) + "," + (m.at("regime").is_string() ? detail::csv_text(m.at("regime")) : "") +
             "," + detail::cell(m.at("r2_geom")) + "," + detail::cell(m.at("r2_comp")) + "\n";
  } else if (kind == "layers") {
    out = "layer,status,R2_full,R2_geom,R2_geom_std,R2_comp\n";
    for (const auto& l : j.at("layers")) {
      const json& rep = l.contains("report") ? l.at("report") : json::object();
      auto comp = [&](const char* k) { return rep.contains(k) ? rep.at(k) : json(nullptr); };
      out += detail::csv_text(l.at("name")) + "," + l.at("status").get<std::string>() + "," + mean_of(comp("r2_full")) +
             "," + mean_of(comp("r2_geom")) + "," + std_of(comp("r2_geom")) + "," + mean_of(comp("r2_comp")) + "\n";
    }
  } else if (kind == "sweep") {
    out = "n";
    for (const auto& m : j.at("models")) out += "," + detail::csv_text(m);
    out += ",rho\n";
    for (const auto& p : j.at("points")) {
      out += std::to_string(p.at("n").get<long long>());
      for (const auto& v : p.at("r2_geom")) out += "," + detail::cell(v);
      out += "," + detail::cell(p.at("rho")) + "\n";
    }
  } else if (kind == "isomer") {
    out = "model,pairs,geom_accuracy,geom_std,comp_accuracy,comp_std\n";
    out += detail::csv_text(j.at("model")) + "," + std::to_string(j.at("pairs").get<long long>()) + "," +
           detail::cell(j.at("geom").at("mean_accuracy")) + "," + detail::cell(j.at("geom").at("std_accuracy")) + "," +
           detail::cell(j.at("comp").at("mean_accuracy")) + "," + detail::cell(j.at("comp").at("std_accuracy")) + "\n";
  } else {
    throw Error(ErrorCode::SchemaViolation, "unknown report kind '" + kind + "'");
  }
  return out;
}

/// SVG for report kinds that have a chart; empty for the others.
inline std::string render_svg(const json& j) {
  const std::string kind = j.value("kind", "");
  if (kind == "probe") {
    std::vector<svg::Bar> bars;
    for (const char* k : {"r2_full", "r2_geom", "r2_comp"})
      if (j.at(k).is_object()) bars.push_back({k, detail::as_number(j.at(k).at("mean")), ""});
    return svg::bar_chart(bars, j.at("model").get<std::string>() + " / " + j.at("target").get<std::string>(), "R^2");
  }
  if (kind == "battery") {
    std::vector<svg::Bar> bars;
    for (const auto& m : j.at("models"))
      bars.push_back({m.at("name"), detail::as_number(m.at("r2_geom")),
                      m.at("regime").is_string() ? m.at("regime").get<std::string>() : std::string()});
    return svg::bar_chart(bars, "R^2_geom per model (" + j.at("target").get<std::string>() + ")", "R^2_geom");
  }
  if (kind == "layers") {
    std::vector<std::string> names;
    svg::Series geom{"R^2_geom", {}};
    for (const auto& l : j.at("layers")) {
      names.push_back(l.at("name"));
      const bool ok = l.contains("report") && l.at("report").at("r2_geom").is_object();
      geom.y.push_back(ok ? detail::as_number(l.at("report").at("r2_geom").at("mean")) : std::nan(""));
    }
    return svg::line_chart(names, {geom}, "Depth profile: " + j.at("model").get<std::string>(), "R^2_geom");
  }
  if (kind == "sweep") {
    std::vector<std::string> xs;
    for (const auto& p : j.at("points")) xs.push_back(std::to_string(p.at("n").get<long long>()));
    std::vector<svg::Series> series;
    const auto& models = j.at("models");
    for (std::size_t m = 0; m < models.size(); ++m) {
      svg::Series s{models[m], {}};
      for (const auto& p : j.at("points")) s.y.push_back(detail::as_number(p.at("r2_geom").at(m)));
      series.push_back(std::move(s));
    }
    return svg::line_chart(xs, series, "Sample efficiency (" + j.at("target").get<std::string>() + ")", "R^2_geom");
  }
  return {};
}

}  // namespace probekit
