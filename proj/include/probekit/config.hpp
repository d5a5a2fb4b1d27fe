#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probekit/battery.hpp"
#include "probekit/compfeat.hpp"
#include "probekit/error.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/matrixio.hpp"
#include "probekit/synthgen.hpp"

namespace probekit {

/// Run parameters for every command. Defaults are 5 folds x 30 seeds, 20 ridge penalties in
/// [1e-3, 1e6] and 4 threads.
struct RunConfig {
  int folds = 5;
  int seeds = 30;
  std::uint64_t seed = 0;
  double alpha_min = 1e-3;
  double alpha_max = 1e6;
  int alpha_count = 20;
  int threads = 4;
  CompositionSpec zspec = CompositionSpec::Z1;
  ProjectionMode mode = ProjectionMode::Foldwise;
  ProbeKind probe = ProbeKind::Ridge;
  Residualizer residualizer = Residualizer::Cpd;
  std::string out = "out";

  GbtConfig gbt{};
  MlpConfig mlp{};

  int random_subspace_trials = 30;
  Index pca_dims = 128;
  int isomer_folds = 5;
  bool gbt_inflation = true;

  std::vector<Index> sweep_sizes{50, 100, 200, 500, 1000, 2000};
  int shap_bootstraps = 100;

  SyntheticConfig synth{};
  std::vector<double> synth_fidelities;  // one persisted model per entry when non-empty

  void validate() const {
    if (folds < 2 || seeds < 1) throw Error(ErrorCode::InvalidConfig, "folds >= 2 and seeds >= 1 required");
    if (!(alpha_min > 0.0) || !(alpha_max >= alpha_min) || alpha_count < 1)
      throw Error(ErrorCode::InvalidConfig, "alpha grid bounds");
    if (threads < 1) throw Error(ErrorCode::InvalidConfig, "threads must be >= 1");
    if (random_subspace_trials < 30) throw Error(ErrorCode::InvalidConfig, "random_subspace_trials must be >= 30");
    if (pca_dims < 1 || isomer_folds < 2 || shap_bootstraps < 2) throw Error(ErrorCode::InvalidConfig, "battery settings");
    gbt.validate();
    mlp.validate();
    for (double f : synth_fidelities)
      if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorCode::InvalidConfig, "fidelities lie in [0, 1]");
  }

  std::vector<double> alpha_grid() const { return log_grid(alpha_min, alpha_max, alpha_count); }

  EvalOptions eval_options() const {
    EvalOptions e;
    e.alpha_grid = alpha_grid();
    e.residualizer = residualizer;
    e.probe = probe;
    e.gbt = gbt;
    e.mlp = mlp;
    e.threads = threads;
    return e;
  }

  FoldPlan plan(Index n) const { return {n, folds, seeds, seed}; }

  BatteryOptions battery_options() const {
    BatteryOptions b;
    b.folds = folds;
    b.seeds = seeds;
    b.seed = seed;
    b.eval = eval_options();
    b.eval.probe = ProbeKind::Ridge;
    b.random_subspace_trials = random_subspace_trials;
    b.pca_dims = pca_dims;
    b.isomer_folds = isomer_folds;
    b.gbt_inflation = gbt_inflation;
    b.gbt = gbt;
    return b;
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::InvalidConfig, where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items())
    if (!allowed.contains(k)) throw Error(ErrorCode::InvalidConfig, "unknown config key " + where + k);
}

template <typename T>
void read_key(const nlohmann::json& obj, const char* key, T& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::InvalidConfig, "bad value for " + where + key);
  }
}

}  // namespace detail

inline ProjectionMode parse_mode(const std::string& s) {
  if (s == "foldwise") return ProjectionMode::Foldwise;
  if (s == "global") return ProjectionMode::Global;
  throw Error(ErrorCode::InvalidConfig, "mode must be foldwise or global, got " + s);
}

inline ProbeKind parse_probe(const std::string& s) {
  if (s == "ridge") return ProbeKind::Ridge;
  if (s == "gbt") return ProbeKind::Gbt;
  if (s == "mlp") return ProbeKind::Mlp;
  throw Error(ErrorCode::InvalidConfig, "probe must be ridge, gbt or mlp, got " + s);
}

inline Residualizer parse_residualizer(const std::string& s) {
  if (s == "cpd") return Residualizer::Cpd;
  if (s == "leace") return Residualizer::Leace;
  throw Error(ErrorCode::InvalidConfig, "residualizer must be cpd or leace, got " + s);
}

inline CompositionSpec parse_zspec(const std::string& s) {
  if (auto z = parse_composition_spec(s)) return *z;
  throw Error(ErrorCode::InvalidConfig, "zspec must be one of Z1..Z4, got " + s);
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  detail::reject_unknown(j, {"folds", "seeds", "seed", "alpha_min", "alpha_max", "alpha_count", "threads", "zspec", "mode",
                             "probe", "residualizer", "out", "gbt", "mlp", "battery", "sweep", "shap", "synth"},
                         "");
  detail::read_key(j, "folds", c.folds, "");
  detail::read_key(j, "seeds", c.seeds, "");
  detail::read_key(j, "seed", c.seed, "");
  detail::read_key(j, "alpha_min", c.alpha_min, "");
  detail::read_key(j, "alpha_max", c.alpha_max, "");
  detail::read_key(j, "alpha_count", c.alpha_count, "");
  detail::read_key(j, "threads", c.threads, "");
  detail::read_key(j, "out", c.out, "");
  std::string s;
  if (j.contains("zspec")) c.zspec = parse_zspec((detail::read_key(j, "zspec", s, ""), s));
  if (j.contains("mode")) c.mode = parse_mode((detail::read_key(j, "mode", s, ""), s));
  if (j.contains("probe")) c.probe = parse_probe((detail::read_key(j, "probe", s, ""), s));
  if (j.contains("residualizer")) c.residualizer = parse_residualizer((detail::read_key(j, "residualizer", s, ""), s));

  if (j.contains("gbt")) {
    const auto& g = j.at("gbt");
    detail::reject_unknown(g, {"rounds", "max_depth", "learning_rate", "min_samples_leaf"}, "gbt.");
    detail::read_key(g, "rounds", c.gbt.rounds, "gbt.");
    detail::read_key(g, "max_depth", c.gbt.max_depth, "gbt.");
    detail::read_key(g, "learning_rate", c.gbt.learning_rate, "gbt.");
    detail::read_key(g, "min_samples_leaf", c.gbt.min_samples_leaf, "gbt.");
  }
  if (j.contains("mlp")) {
    const auto& m = j.at("mlp");
    detail::reject_unknown(m, {"hidden", "batch_size", "validation_fraction", "patience", "max_epochs", "learning_rate",
                               "l2", "seed"},
                           "mlp.");
    if (m.contains("hidden")) {
      std::vector<Index> h;
      detail::read_key(m, "hidden", h, "mlp.");
      if (h.size() != 2) throw Error(ErrorCode::InvalidConfig, "mlp.hidden needs exactly two layer sizes");
      c.mlp.hidden1 = h[0];
      c.mlp.hidden2 = h[1];
    }
    detail::read_key(m, "batch_size", c.mlp.batch_size, "mlp.");
    detail::read_key(m, "validation_fraction", c.mlp.validation_fraction, "mlp.");
    detail::read_key(m, "patience", c.mlp.patience, "mlp.");
    detail::read_key(m, "max_epochs", c.mlp.max_epochs, "mlp.");
    detail::read_key(m, "learning_rate", c.mlp.learning_rate, "mlp.");
    detail::read_key(m, "l2", c.mlp.l2, "mlp.");
    detail::read_key(m, "seed", c.mlp.seed, "mlp.");
  }
  if (j.contains("battery")) {
    const auto& b = j.at("battery");
    detail::reject_unknown(b, {"random_subspace_trials", "pca_dims", "isomer_folds", "gbt_inflation"}, "battery.");
    detail::read_key(b, "random_subspace_trials", c.random_subspace_trials, "battery.");
    detail::read_key(b, "pca_dims", c.pca_dims, "battery.");
    detail::read_key(b, "isomer_folds", c.isomer_folds, "battery.");
    detail::read_key(b, "gbt_inflation", c.gbt_inflation, "battery.");
  }
  if (j.contains("sweep")) {
    detail::reject_unknown(j.at("sweep"), {"sizes"}, "sweep.");
    detail::read_key(j.at("sweep"), "sizes", c.sweep_sizes, "sweep.");
  }
  if (j.contains("shap")) {
    detail::reject_unknown(j.at("shap"), {"bootstraps"}, "shap.");
    detail::read_key(j.at("shap"), "bootstraps", c.shap_bootstraps, "shap.");
  }
  if (j.contains("synth")) {
    const auto& y = j.at("synth");
    detail::reject_unknown(y, {"n", "d", "k", "comp_share", "geom_share", "noise_share", "nonlinear_comp_leak",
                               "n_isomer_groups", "isomer_group_size", "leak_scale", "representation_noise", "seed",
                               "fidelities"},
                           "synth.");
    auto& sc = c.synth;
    detail::read_key(y, "n", sc.n, "synth.");
    detail::read_key(y, "d", sc.d, "synth.");
    detail::read_key(y, "k", sc.k, "synth.");
    detail::read_key(y, "comp_share", sc.comp_share, "synth.");
    detail::read_key(y, "geom_share", sc.geom_share, "synth.");
    detail::read_key(y, "noise_share", sc.noise_share, "synth.");
    detail::read_key(y, "nonlinear_comp_leak", sc.nonlinear_comp_leak, "synth.");
    detail::read_key(y, "n_isomer_groups", sc.n_isomer_groups, "synth.");
    detail::read_key(y, "isomer_group_size", sc.isomer_group_size, "synth.");
    detail::read_key(y, "leak_scale", sc.leak_scale, "synth.");
    detail::read_key(y, "representation_noise", sc.representation_noise, "synth.");
    detail::read_key(y, "seed", sc.seed, "synth.");
    detail::read_key(y, "fidelities", c.synth_fidelities, "synth.");
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

inline nlohmann::json to_json(const RunConfig& c) {
  const auto& s = c.synth;
  return {
      {"folds", c.folds},
      {"seeds", c.seeds},
      {"seed", c.seed},
      {"alpha_min", c.alpha_min},
      {"alpha_max", c.alpha_max},
      {"alpha_count", c.alpha_count},
      {"threads", c.threads},
      {"zspec", std::string(to_string(c.zspec))},
      {"mode", std::string(to_string(c.mode))},
      {"probe", std::string(to_string(c.probe))},
      {"residualizer", std::string(to_string(c.residualizer))},
      {"out", c.out},
      {"gbt",
       {{"rounds", c.gbt.rounds},
        {"max_depth", c.gbt.max_depth},
        {"learning_rate", c.gbt.learning_rate},
        {"min_samples_leaf", c.gbt.min_samples_leaf}}},
      {"mlp",
       {{"hidden", {c.mlp.hidden1, c.mlp.hidden2}},
        {"batch_size", c.mlp.batch_size},
        {"validation_fraction", c.mlp.validation_fraction},
        {"patience", c.mlp.patience},
        {"max_epochs", c.mlp.max_epochs},
        {"learning_rate", c.mlp.learning_rate},
        {"l2", c.mlp.l2},
        {"seed", c.mlp.seed}}},
      {"battery",
       {{"random_subspace_trials", c.random_subspace_trials},
        {"pca_dims", c.pca_dims},
        {"isomer_folds", c.isomer_folds},
        {"gbt_inflation", c.gbt_inflation}}},
      {"sweep", {{"sizes", c.sweep_sizes}}},
      {"shap", {{"bootstraps", c.shap_bootstraps}}},
      {"synth",
       {{"n", s.n},
        {"d", s.d},
        {"k", s.k},
        {"comp_share", s.comp_share},
        {"geom_share", s.geom_share},
        {"noise_share", s.noise_share},
        {"nonlinear_comp_leak", s.nonlinear_comp_leak},
        {"n_isomer_groups", s.n_isomer_groups},
        {"isomer_group_size", s.isomer_group_size},
        {"leak_scale", s.leak_scale},
        {"representation_noise", s.representation_noise},
        {"seed", s.seed},
        {"fidelities", c.synth_fidelities}}},
  };
}

/// FNV-1a over the canonical JSON of the settings that affect numbers (thread count and output
/// directory excluded).
inline std::string config_fingerprint(const RunConfig& c) {
  auto j = to_json(c);
  j.erase("threads");
  j.erase("out");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// PROBEKIT_THREADS, when set to a positive integer.
inline std::optional<int> threads_from_env() {
  const char* v = std::getenv("PROBEKIT_THREADS");
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  const long t = std::strtol(v, &end, 10);
  if (*end != '\0' || t < 1) throw Error(ErrorCode::InvalidConfig, "PROBEKIT_THREADS must be a positive integer");
  return static_cast<int>(t);
}

}  // namespace probekit
