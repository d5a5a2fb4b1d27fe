#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "probekit/probekit.hpp"

namespace fs = std::filesystem;
using namespace probekit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitPartial = 4;

struct Options {
  std::vector<std::string> manifests;
  std::string target;
  std::string config;
  std::string mode;
  std::string zspec;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string layer;
  std::string input;
};

RunConfig resolve_config(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.mode.empty()) c.mode = parse_mode(o.mode);
  if (!o.zspec.empty()) c.zspec = parse_zspec(o.zspec);
  if (o.threads > 0) c.threads = o.threads;
  else if (auto t = threads_from_env()) c.threads = *t;
  if (o.seed) {
    c.seed = *o.seed;
    c.synth.seed = *o.seed;
  }
  if (!o.out.empty()) c.out = o.out;
  c.validate();
  return c;
}

void require_manifests(const Options& o, std::size_t at_least, const char* cmd) {
  if (o.manifests.size() < at_least)
    throw Error(ErrorCode::InvalidConfig, std::string(cmd) + " needs at least " + std::to_string(at_least) + " --manifest");
}

void require_target(const Options& o) {
  if (o.target.empty()) throw Error(ErrorCode::InvalidConfig, "--target is required");
}

const Matrix& pick_layer(const Dataset& ds, const std::string& layer) {
  return layer.empty() ? ds.layers.back() : ds.layer(layer);
}

std::string pick_layer_name(const Dataset& ds, const std::string& layer) {
  return layer.empty() ? ds.manifest.layers.back().name : layer;
}

Matrix composition(const Dataset& ds, CompositionSpec spec) { return composition_for(ds.formulas, spec); }

fs::path prepare_out(const RunConfig& c) {
  fs::create_directories(c.out);
  return c.out;
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

/// Writes <stem>.json plus its CSV and, when the kind has one, its SVG.
void emit(const fs::path& dir, const std::string& stem, const json& j) {
  write_json(dir / (stem + ".json"), j);
  write_file(dir / (stem + ".csv"), render_csv(j));
  const std::string chart = render_svg(j);
  if (!chart.empty()) write_file(dir / (stem + ".svg"), chart);
}

ReportContext context(const Dataset& ds, const RunConfig& c) {
  return {ds.manifest.model_id, std::string(to_string(c.zspec)), config_fingerprint(c), c.folds, c.seeds};
}

int cmd_probe(const Options& o) {
  require_manifests(o, 1, "probe");
  require_target(o);
  const RunConfig c = resolve_config(o);
  const Dataset ds = load_dataset(o.manifests.front());
  const auto& y = ds.target(o.target);
  const Matrix& x = pick_layer(ds, o.layer);
  const auto report = run_cpd_evaluation(x, composition(ds, c.zspec), y, c.plan(x.rows()), c.mode, c.eval_options());
  const json j = probe_report_json(report, context(ds, c));
  emit(prepare_out(c), "probe", j);
  std::cout << render_csv(j);
  return kExitOk;
}

ModelInput model_input(const Dataset& ds, const std::string& target, const std::string& layer) {
  return {ds.manifest.model_id, pick_layer(ds, layer), ds.formulas, ds.target(target), ds.manifest.regime};
}

int cmd_battery(const Options& o) {
  require_manifests(o, 2, "battery");
  require_target(o);
  const RunConfig c = resolve_config(o);
  std::vector<ModelInput> models;
  for (const auto& m : o.manifests) models.push_back(model_input(load_dataset(m), o.target, o.layer));
  const auto report = robustness_battery(models, c.battery_options());
  emit(prepare_out(c), "battery", battery_json(report, config_fingerprint(c)));
  for (const auto& ch : report.checks)
    if (ch.status != "ok") std::cerr << "check " << ch.name << " failed: " << ch.message << "\n";
  return report.all_ok() ? kExitOk : kExitPartial;
}

int cmd_layers(const Options& o) {
  require_manifests(o, 1, "layers");
  require_target(o);
  const RunConfig c = resolve_config(o);
  const Dataset ds = load_dataset(o.manifests.front());
  const auto& y = ds.target(o.target);
  const Matrix z = composition(ds, c.zspec);
  const auto ctx = context(ds, c);

  json layers = json::array();
  std::optional<std::size_t> best;
  double best_value = 0.0;
  bool any_error = false;
  for (std::size_t i = 0; i < ds.layers.size(); ++i) {
    json entry{{"name", ds.manifest.layers[i].name}};
    try {
      const auto report = run_cpd_evaluation(ds.layers[i], z, y, c.plan(ds.rows()), c.mode, c.eval_options());
      const double g = report.r2_geom->summary.mean;
      if (!best || g > best_value) {
        best = i;
        best_value = g;
      }
      entry["status"] = "ok";
      entry["report"] = probe_report_json(report, ctx);
    } catch (const std::exception& e) {
      any_error = true;
      entry["status"] = "error";
      entry["message"] = e.what();
      std::cerr << "layer " << ds.manifest.layers[i].name << ": " << e.what() << "\n";
    }
    layers.push_back(std::move(entry));
  }
  const json j{{"kind", "layers"},
               {"model", ds.manifest.model_id},
               {"target", o.target},
               {"config_fingerprint", ctx.fingerprint},
               {"layers", layers},
               {"best_layer", best ? json(ds.manifest.layers[*best].name) : json(nullptr)}};
  emit(prepare_out(c), "layers", j);
  if (best) std::cout << "best layer: " << ds.manifest.layers[*best].name << "\n";
  if (!best) return kExitRuntime;
  return any_error ? kExitPartial : kExitOk;
}

int cmd_isomer(const Options& o) {
  require_manifests(o, 1, "isomer");
  require_target(o);
  const RunConfig c = resolve_config(o);
  const Dataset ds = load_dataset(o.manifests.front());
  const auto dec = ols_project(pick_layer(ds, o.layer), composition(ds, c.zspec));
  IsomerOptions iso;
  iso.folds = c.isomer_folds;
  const auto r = isomer_benchmark(dec.x_geom, dec.x_comp, ds.formulas, ds.target(o.target), c.seed, iso);
  const json j = isomer_json(r, ds.manifest.model_id, o.target);
  emit(prepare_out(c), "isomer", j);
  std::cout << render_csv(j);
  return kExitOk;
}

int cmd_sweep(const Options& o) {
  require_manifests(o, 1, "sweep");
  require_target(o);
  const RunConfig c = resolve_config(o);
  std::vector<ModelInput> models;
  for (const auto& m : o.manifests) models.push_back(model_input(load_dataset(m), o.target, o.layer));
  SweepOptions s;
  s.folds = c.folds;
  s.seeds = c.seeds;
  s.base_seed = c.seed;
  s.subset_seed = mix_seed(c.seed, 0x5ee9);
  s.zspec = c.zspec;
  s.mode = c.mode;
  s.eval = c.eval_options();
  const auto result = sample_efficiency_sweep(models, c.sweep_sizes, s);
  emit(prepare_out(c), "sweep", sweep_json(result, o.target, config_fingerprint(c)));
  return kExitOk;
}

int cmd_featurize(const Options& o) {
  require_manifests(o, 1, "featurize");
  const RunConfig c = resolve_config(o);
  const Dataset ds = load_dataset(o.manifests.front());
  const auto molecules = parse_formulas(ds.formulas);
  const auto z = build_composition(molecules, c.zspec);
  if (z.degenerate_atom_count) std::cerr << "warning: constant atom count, standardized column set to zero\n";
  const auto dir = prepare_out(c);
  const std::string stem = "composition_" + std::string(to_string(c.zspec));
  store_matrix(z.z, dir / (stem + ".pmat"));
  store_matrix(z.z, dir / (stem + ".csv"), MatrixFormat::CSV);
  return kExitOk;
}

int cmd_decompose(const Options& o) {
  require_manifests(o, 1, "decompose");
  const RunConfig c = resolve_config(o);
  const Dataset ds = load_dataset(o.manifests.front());
  const auto dec = ols_project(pick_layer(ds, o.layer), composition(ds, c.zspec));
  const auto dir = prepare_out(c);
  const std::string stem = pick_layer_name(ds, o.layer);
  store_matrix(dec.x_geom, dir / (stem + "_geom.pmat"));
  store_matrix(dec.x_comp, dir / (stem + "_comp.pmat"));
  return kExitOk;
}

int cmd_synth(const Options& o) {
  const RunConfig c = resolve_config(o);
  const auto data = generate(c.synth);
  const auto dir = prepare_out(c);
  if (c.synth_fidelities.empty()) {
    std::cout << persist(data, dir, "synth").string() << "\n";
    return kExitOk;
  }
  for (std::size_t i = 0; i < c.synth_fidelities.size(); ++i) {
    SyntheticData model = data;
    model.x = synth_layer(data, c.synth_fidelities[i], mix_seed(c.synth.seed, 1000 + i));
    std::cout << persist(model, dir / ("model_" + std::to_string(i)), "synth_" + std::to_string(i)).string() << "\n";
  }
  return kExitOk;
}

int cmd_report(const Options& o) {
  if (o.input.empty()) throw Error(ErrorCode::InvalidConfig, "--input is required");
  json j;
  try {
    j = json::parse(read_file(o.input));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("report input is not JSON: ") + e.what());
  }
  try {
    const fs::path dir = o.out.empty() ? fs::path(o.input).parent_path() : fs::path(o.out);
    if (!dir.empty()) fs::create_directories(dir);
    const std::string stem = fs::path(o.input).stem().string();
    write_file(dir / (stem + ".csv"), render_csv(j));
    const std::string chart = render_svg(j);
    if (!chart.empty()) write_file(dir / (stem + ".svg"), chart);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("malformed report: ") + e.what());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional probe decomposition toolkit"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool manifests, bool target) {
    if (manifests) sub->add_option("--manifest", o.manifests, "Dataset manifest (repeatable)");
    if (target) sub->add_option("--target", o.target, "Target name declared in the manifest");
    sub->add_option("--config", o.config, "Run configuration JSON");
    sub->add_option("--mode", o.mode, "Projection mode")->check(CLI::IsMember({"foldwise", "global"}));
    sub->add_option("--zspec", o.zspec, "Composition features")->check(CLI::IsMember({"Z1", "Z2", "Z3", "Z4"}));
    sub->add_option("--threads", o.threads, "Worker threads (default PROBEKIT_THREADS, then config)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "Base seed");
    sub->add_option("--out", o.out, "Output directory");
    if (manifests) sub->add_option("--layer", o.layer, "Layer name (default: last layer in the manifest)");
  };

  struct Command {
    const char* name;
    const char* help;
    bool manifests;
    bool target;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"probe", "Ridge probes of the full, geometric and compositional parts", true, true, cmd_probe},
      {"battery", "Robustness checks and rank comparisons across models", true, true, cmd_battery},
      {"layers", "Per-layer evaluation and depth profile", true, true, cmd_layers},
      {"isomer", "Isomer pair-ordering benchmark", true, true, cmd_isomer},
      {"sweep", "Sample-efficiency sweep", true, true, cmd_sweep},
      {"featurize", "Write composition features", true, false, cmd_featurize},
      {"decompose", "Write geometric and compositional parts of a layer", true, false, cmd_decompose},
      {"synth", "Generate a synthetic dataset", false, false, cmd_synth},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> subs;
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    common(sub, cmd.manifests, cmd.target);
    subs.emplace_back(sub, cmd.run);
  }
  auto* report = app.add_subcommand("report", "Render CSV and SVG from a report JSON");
  report->add_option("--input", o.input, "Report JSON written by another command")->required();
  report->add_option("--out", o.out, "Output directory (default: next to the input)");
  subs.emplace_back(report, cmd_report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    for (const auto& [sub, run] : subs)
      if (sub->parsed()) return run(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
