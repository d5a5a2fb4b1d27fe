#pragma once

// Extraction-side contract: what a checkpoint adapter must produce so the rest of the
// library can load it. The adapter itself (model loading, inference) lives elsewhere;
// here are the registry format, probe-set selection, pooling and the on-disk writer.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probekit/error.hpp"
#include "probekit/matrix.hpp"
#include "probekit/matrixio.hpp"
#include "probekit/residual.hpp"

namespace probekit {

/// QM9 property columns used as probe targets.
inline const std::map<std::string, int>& qm9_target_columns() {
  static const std::map<std::string, int> cols = {{"dipole", 0}, {"polarizability", 1}, {"gap", 4}, {"zpve", 11}};
  return cols;
}

struct LayerHook {
  std::string name;  // layer name written to the manifest
  std::string hook;  // runtime hook identifier
  Index dim = 0;
};

struct RegistryEntry {
  std::string model_id;
  std::string checkpoint;
  std::vector<LayerHook> layers;
  std::optional<std::string> regime;
};

struct ModelRegistry {
  std::map<std::string, RegistryEntry> models;

  const RegistryEntry& at(const std::string& id) const {
    const auto it = models.find(id);
    if (it == models.end()) {
      std::string known;
      for (const auto& [k, _] : models) known += (known.empty() ? "" : ", ") + k;
      throw Error(ErrorCode::InvalidConfig, "unknown model '" + id + "'; registry has: " + known);
    }
    return it->second;
  }
};

/// {"models": {"<id>": {"checkpoint": str, "regime"?: str, "layers": [{"name", "hook", "dim"}]}}}
inline ModelRegistry parse_registry(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("models") || !j.at("models").is_object())
    throw Error(ErrorCode::SchemaViolation, "registry: 'models' object is required");
  ModelRegistry reg;
  try {
    for (const auto& [id, m] : j.at("models").items()) {
      RegistryEntry e;
      e.model_id = id;
      e.checkpoint = m.at("checkpoint").get<std::string>();
      if (m.contains("regime")) e.regime = m.at("regime").get<std::string>();
      for (const auto& l : m.at("layers")) {
        LayerHook h{l.at("name").get<std::string>(), l.at("hook").get<std::string>(), l.at("dim").get<Index>()};
        if (h.dim < 1) throw Error(ErrorCode::SchemaViolation, "registry: " + id + "." + h.name + " needs dim >= 1");
        e.layers.push_back(std::move(h));
      }
      if (e.layers.empty()) throw Error(ErrorCode::SchemaViolation, "registry: " + id + " lists no layers");
      reg.models.emplace(id, std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::SchemaViolation, std::string("registry: ") + ex.what());
  }
  return reg;
}

inline ModelRegistry load_registry(const fs::path& path) {
  try {
    return parse_registry(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& ex) {
    throw Error(ErrorCode::SchemaViolation, std::string("registry: ") + ex.what());
  }
}

struct ExtractionJob {
  std::string model_id;
  std::vector<std::string> layers;  // empty: every registered layer
  fs::path out_dir;
  Index n_molecules = 2000;
  std::uint32_t selection_seed = 42;
};

/// Same sequence as numpy's legacy RandomState(seed).permutation(n): MT19937 seeded
/// with init_genrand and a backwards Fisher-Yates using masked rejection draws.
inline RowSet legacy_permutation(Index n, std::uint32_t seed) {
  RowSet out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
  std::mt19937 mt(seed);
  for (Index i = n - 1; i >= 1; --i) {
    auto max = static_cast<std::uint32_t>(i);
    std::uint32_t mask = max;
    for (int s = 1; s < 32; s <<= 1) mask |= mask >> s;
    std::uint32_t j;
    do j = static_cast<std::uint32_t>(mt()) & mask;
    while (j > max);
    std::swap(out[static_cast<std::size_t>(i)], out[j]);
  }
  return out;
}

/// Dataset indices of the fixed probe set: the first n of the seeded permutation.
inline RowSet probe_set_indices(Index dataset_size, Index n, std::uint32_t seed) {
  if (n < 1 || n > dataset_size)
    throw Error(ErrorCode::InvalidConfig, "probe set of " + std::to_string(n) + " from " + std::to_string(dataset_size) + " molecules");
  RowSet perm = legacy_permutation(dataset_size, seed);
  perm.resize(static_cast<std::size_t>(n));
  return perm;
}

/// Per-molecule mean of consecutive atom rows; atoms_per_molecule must cover every row.
inline Matrix mean_pool(const Matrix& atom_features, std::span<const Index> atoms_per_molecule) {
  Index total = 0;
  for (Index a : atoms_per_molecule) {
    if (a < 1) throw Error(ErrorCode::InvalidConfig, "molecule with no atoms");
    total += a;
  }
  if (total != atom_features.rows())
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(total) + " atoms declared, " + std::to_string(atom_features.rows()) + " rows given");
  Matrix out(static_cast<Index>(atoms_per_molecule.size()), atom_features.cols());
  Index start = 0;
  for (std::size_t m = 0; m < atoms_per_molecule.size(); ++m) {
    out.row(static_cast<Index>(m)) = atom_features.middleRows(start, atoms_per_molecule[m]).colwise().mean();
    start += atoms_per_molecule[m];
  }
  return out;
}

/// Runtime side of an adapter: per-atom activations of one molecule at one hook.
class ActivationSource {
 public:
  virtual ~ActivationSource() = default;
  virtual std::vector<std::string> available_hooks() const = 0;
  virtual Matrix atom_activations(Index molecule, const std::string& hook) = 0;
};

/// Registered layers selected by the job, checked against the hooks the runtime exposes.
inline std::vector<LayerHook> resolve_hooks(const ExtractionJob& job, const RegistryEntry& entry,
                                            const std::vector<std::string>& available) {
  std::vector<LayerHook> out;
  if (job.layers.empty()) {
    out = entry.layers;
  } else {
    for (const auto& name : job.layers) {
      const auto it = std::find_if(entry.layers.begin(), entry.layers.end(), [&](const LayerHook& h) { return h.name == name; });
      if (it == entry.layers.end()) {
        std::string known;
        for (const auto& h : entry.layers) known += (known.empty() ? "" : ", ") + h.name;
        throw Error(ErrorCode::InvalidConfig, "layer '" + name + "' is not registered for " + entry.model_id + "; registered: " + known);
      }
      out.push_back(*it);
    }
  }
  for (const auto& h : out)
    if (std::find(available.begin(), available.end(), h.hook) == available.end()) {
      std::string names;
      for (const auto& a : available) names += (names.empty() ? "" : ", ") + a;
      throw Error(ErrorCode::InvalidConfig, "hook '" + h.hook + "' not found; available: " + names);
    }
  return out;
}

inline nlohmann::json channel_layout_json(const ChannelLayout& layout) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : layout.blocks) blocks.push_back({{"L", b.order}, {"start_col", b.start_col}, {"num_channels", b.num_channels}});
  return {{"blocks", blocks}};
}

struct ExtractionInputs {
  std::vector<std::string> formulas;  // whole dataset, indexed like the runtime
  Matrix properties;                  // whole dataset, one column per QM9 property
  std::map<std::string, std::string> units;
  std::optional<ChannelLayout> layout;
};

/// Pools every selected layer over the probe set and writes PMAT layers, formulas,
/// targets, the optional channel layout and the manifest. Returns the manifest path.
inline fs::path run_extraction(const ExtractionJob& job, const RegistryEntry& entry, ActivationSource& source,
                               const ExtractionInputs& in) {
  const auto dataset_size = static_cast<Index>(in.formulas.size());
  if (in.properties.rows() != dataset_size)
    throw Error(ErrorCode::RowCountMismatch, "properties and formulas disagree on the dataset size");
  const auto hooks = resolve_hooks(job, entry, source.available_hooks());
  const RowSet rows = probe_set_indices(dataset_size, job.n_molecules, job.selection_seed);
  fs::create_directories(job.out_dir);

  DatasetManifest m;
  m.model_id = entry.model_id;
  m.regime = entry.regime;
  for (const auto& h : hooks) {
    Matrix x(job.n_molecules, h.dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Matrix atoms = source.atom_activations(rows[i], h.hook);
      if (atoms.cols() != h.dim)
        throw Error(ErrorCode::DimensionMismatch, h.name + " declares " + std::to_string(h.dim) + " dims, runtime gave " +
                                                       std::to_string(atoms.cols()));
      if (atoms.rows() < 1) throw Error(ErrorCode::InvalidConfig, "molecule " + std::to_string(rows[i]) + " has no atoms");
      x.row(static_cast<Index>(i)) = atoms.colwise().mean();
    }
    const std::string file = h.name + ".pmat";
    store_matrix(x, job.out_dir / file);
    m.layers.push_back({h.name, file, h.dim});
  }

  std::vector<std::string> formulas;
  for (Index r : rows) formulas.push_back(in.formulas[static_cast<std::size_t>(r)]);
  store_formulas(formulas, job.out_dir / "formulas.txt");
  m.formulas_path = "formulas.txt";

  for (const auto& [name, col] : qm9_target_columns()) {
    if (col >= in.properties.cols()) continue;
    const std::string file = name + ".pmat";
    store_matrix(Matrix(select_rows(Vector(in.properties.col(col)), rows)), job.out_dir / file);
    const auto u = in.units.find(name);
    m.targets.push_back({name, file, u == in.units.end() ? "" : u->second});
  }
  if (in.layout) {
    write_file(job.out_dir / "channel_layout.json", channel_layout_json(*in.layout).dump(2) + "\n");
    m.channel_layout_path = "channel_layout.json";
  }
  const auto path = job.out_dir / "manifest.json";
  store_manifest(m, path);
  return path;
}

}  // namespace probekit
