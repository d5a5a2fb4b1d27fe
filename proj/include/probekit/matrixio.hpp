#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "probekit/error.hpp"
#include "probekit/matrix.hpp"

namespace probekit {

namespace fs = std::filesystem;

enum class MatrixFormat { PMAT, CSV };

struct TargetVector {
  std::string name;
  Vector values;
  std::string units;
};

struct LayerEntry {
  std::string name;
  std::string path;
  Index dim = 0;
};

struct TargetEntry {
  std::string name;
  std::string path;
  std::string units;
};

struct DatasetManifest {
  std::string model_id;
  std::vector<LayerEntry> layers;
  std::string formulas_path;
  std::vector<TargetEntry> targets;
  std::optional<std::string> channel_layout_path;
  /// Optional training-regime tag used to colour battery charts.
  std::optional<std::string> regime;
  /// Directory relative paths resolve against.
  fs::path base_dir;

  fs::path resolve(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }

  const TargetEntry* find_target(std::string_view name) const {
    for (const auto& t : targets)
      if (t.name == name) return &t;
    return nullptr;
  }

  const LayerEntry* find_layer(std::string_view name) const {
    for (const auto& l : layers)
      if (l.name == name) return &l;
    return nullptr;
  }
};

namespace pmat {

inline constexpr std::array<char, 4> kMagic{'P', 'M', 'A', 'T'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;

template <typename T>
void put_le(std::string& buf, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  buf.append(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

inline std::string encode(const Matrix& m) {
  std::string buf;
  buf.reserve(kHeaderBytes + 8 * static_cast<std::size_t>(m.size()));
  buf.append(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(buf, kVersion);
  put_le<std::uint16_t>(buf, 0);
  put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(m.rows()));
  put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) put_le<double>(buf, m(r, c));
  return buf;
}

inline Matrix decode(std::string_view bytes) {
  if (bytes.size() < kHeaderBytes || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw Error(ErrorCode::MalformedHeader, "missing PMAT magic");
  const auto version = get_le<std::uint16_t>(bytes.data() + 4);
  if (version != kVersion)
    throw Error(ErrorCode::MalformedHeader, "unsupported PMAT version " + std::to_string(version));
  const auto rows = get_le<std::uint64_t>(bytes.data() + 8);
  const auto cols = get_le<std::uint64_t>(bytes.data() + 16);
  if (rows == 0 || cols == 0) throw Error(ErrorCode::MalformedHeader, "zero-sized PMAT dimension");
  // Guard the multiplication before comparing sizes.
  if (cols > (bytes.size() / 8) || rows > (bytes.size() / 8) / cols + 1)
    throw Error(ErrorCode::LengthMismatch, "declared shape exceeds file size");
  const std::uint64_t expected = kHeaderBytes + 8 * rows * cols;
  if (bytes.size() != expected)
    throw Error(ErrorCode::LengthMismatch, "expected " + std::to_string(expected) + " bytes, found " +
                                               std::to_string(bytes.size()));
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  const char* p = bytes.data() + kHeaderBytes;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c, p += 8) {
      const double v = get_le<double>(p);
      if (!std::isfinite(v)) throw NonFiniteError(r, c);
      m(r, c) = v;
    }
  return m;
}

}  // namespace pmat

namespace csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) return std::nullopt;
  return v;
}

inline Matrix decode(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    auto line = trim(text.substr(start, pos - start));
    if (!line.empty()) lines.push_back(line);
    start = pos + 1;
  }
  if (lines.empty()) throw Error(ErrorCode::MalformedHeader, "empty CSV");

  std::size_t first = 0;
  if (!parse_number(split(lines[0]).front()).has_value()) first = 1;  // header row
  if (first >= lines.size()) throw Error(ErrorCode::MalformedHeader, "CSV has a header but no data");

  const std::size_t cols = split(lines[first]).size();
  Matrix m(static_cast<Index>(lines.size() - first), static_cast<Index>(cols));
  for (std::size_t i = first; i < lines.size(); ++i) {
    const auto tokens = split(lines[i]);
    const auto r = static_cast<Index>(i - first);
    if (tokens.size() != cols)
      throw Error(ErrorCode::LengthMismatch, "row " + std::to_string(r) + " has " +
                                                 std::to_string(tokens.size()) + " fields, expected " +
                                                 std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c) {
      const auto v = parse_number(tokens[c]);
      if (!v) {
        throw Error(ErrorCode::MalformedHeader, "non-numeric field '" + std::string(tokens[c]) +
                                                    "' at row " + std::to_string(r));
      }
      if (!std::isfinite(*v)) throw NonFiniteError(static_cast<std::size_t>(r), c);
      m(r, static_cast<Index>(c)) = *v;
    }
  }
  return m;
}

inline std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline std::string encode(const Matrix& m) {
  std::string out;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace csv

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

inline Matrix load_matrix(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, path.string());
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && std::equal(pmat::kMagic.begin(), pmat::kMagic.end(), bytes.begin()))
    return pmat::decode(bytes);
  if (path.extension() == ".pmat") throw Error(ErrorCode::MalformedHeader, "missing PMAT magic in " + path.string());
  return csv::decode(bytes);
}

inline void store_matrix(const Matrix& m, const fs::path& path, MatrixFormat format = MatrixFormat::PMAT) {
  if (path.has_parent_path() && !fs::is_directory(path.parent_path()))
    throw Error(ErrorCode::IoFailure, "parent directory missing: " + path.parent_path().string());
  write_file(path, format == MatrixFormat::PMAT ? pmat::encode(m) : csv::encode(m));
}

/// Targets are stored as single-column (or single-row) matrices.
inline TargetVector load_target(const fs::path& path, std::string name, std::string units = {}) {
  const Matrix m = load_matrix(path);
  if (m.cols() != 1 && m.rows() != 1)
    throw Error(ErrorCode::SchemaViolation, "target file " + path.string() + " must hold a single column");
  Vector values = m.cols() == 1 ? Vector(m.col(0)) : Vector(m.row(0).transpose());
  return {std::move(name), std::move(values), std::move(units)};
}

inline std::vector<std::string> load_formulas(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string::npos) pos = text.size();
    std::string line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = pos + 1;
  }
  return lines;
}

inline void store_formulas(std::span<const std::string> formulas, const fs::path& path) {
  std::string out;
  for (const auto& f : formulas) {
    out += f;
    out += '\n';
  }
  write_file(path, out);
}

/// Fully loaded model dataset. Every cross-file invariant holds once constructed.
struct Dataset {
  DatasetManifest manifest;
  std::vector<std::string> formulas;
  std::vector<Matrix> layers;  // parallel to manifest.layers
  std::vector<TargetVector> targets;

  Index rows() const { return static_cast<Index>(formulas.size()); }

  const Matrix& layer(std::string_view name) const {
    for (std::size_t i = 0; i < manifest.layers.size(); ++i)
      if (manifest.layers[i].name == name) return layers[i];
    throw Error(ErrorCode::SchemaViolation, "no layer named " + std::string(name));
  }

  const TargetVector& target(std::string_view name) const {
    for (const auto& t : targets)
      if (t.name == name) return t;
    std::string available;
    for (const auto& t : targets) available += (available.empty() ? "" : ", ") + t.name;
    throw Error(ErrorCode::SchemaViolation,
                "unknown target '" + std::string(name) + "'; available: " + available);
  }
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* key,
                                           nlohmann::json::value_t type, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw Error(ErrorCode::SchemaViolation, where + key);
  const auto& v = obj.at(key);
  const bool ok = type == nlohmann::json::value_t::number_integer
                      ? (v.is_number_integer())
                      : v.type() == type;
  if (!ok) throw Error(ErrorCode::SchemaViolation, where + key);
  return v;
}

inline DatasetManifest parse_manifest(const nlohmann::json& j, fs::path base_dir) {
  using vt = nlohmann::json::value_t;
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  m.model_id = require_field(j, "model_id", vt::string, "").get<std::string>();
  const auto& layers = require_field(j, "layers", vt::array, "");
  if (layers.empty()) throw Error(ErrorCode::SchemaViolation, "layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = "layers[" + std::to_string(i) + "].";
    LayerEntry e;
    e.name = require_field(layers[i], "name", vt::string, where).get<std::string>();
    e.path = require_field(layers[i], "path", vt::string, where).get<std::string>();
    e.dim = require_field(layers[i], "dim", vt::number_integer, where).get<Index>();
    if (e.dim <= 0) throw Error(ErrorCode::SchemaViolation, where + "dim");
    m.layers.push_back(std::move(e));
  }
  m.formulas_path = require_field(j, "formulas_path", vt::string, "").get<std::string>();
  const auto& targets = require_field(j, "targets", vt::array, "");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::string where = "targets[" + std::to_string(i) + "].";
    TargetEntry t;
    t.name = require_field(targets[i], "name", vt::string, where).get<std::string>();
    t.path = require_field(targets[i], "path", vt::string, where).get<std::string>();
    t.units = require_field(targets[i], "units", vt::string, where).get<std::string>();
    m.targets.push_back(std::move(t));
  }
  if (j.contains("channel_layout_path") && !j.at("channel_layout_path").is_null())
    m.channel_layout_path = require_field(j, "channel_layout_path", vt::string, "").get<std::string>();
  if (j.contains("regime") && !j.at("regime").is_null())
    m.regime = require_field(j, "regime", vt::string, "").get<std::string>();
  return m;
}

}  // namespace detail

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["model_id"] = m.model_id;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : m.layers) j["layers"].push_back({{"name", l.name}, {"path", l.path}, {"dim", l.dim}});
  j["formulas_path"] = m.formulas_path;
  j["targets"] = nlohmann::json::array();
  for (const auto& t : m.targets)
    j["targets"].push_back({{"name", t.name}, {"path", t.path}, {"units", t.units}});
  if (m.channel_layout_path) j["channel_layout_path"] = *m.channel_layout_path;
  if (m.regime) j["regime"] = *m.regime;
  return j;
}

inline void store_manifest(const DatasetManifest& m, const fs::path& path) {
  write_file(path, manifest_to_json(m).dump(2) + "\n");
}

/// Parses the manifest and loads every file it references, checking
/// shapes and row counts across layers, formulas and targets.
inline Dataset load_dataset(const fs::path& manifest_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("invalid JSON: ") + e.what());
  }
  Dataset ds;
  ds.manifest = detail::parse_manifest(j, fs::absolute(manifest_path).parent_path());
  const auto& m = ds.manifest;

  auto existing = [&](const std::string& p) {
    const auto full = m.resolve(p);
    if (!fs::exists(full)) throw Error(ErrorCode::DanglingPath, full.string());
    return full;
  };

  ds.formulas = load_formulas(existing(m.formulas_path));
  const auto n = ds.rows();
  for (const auto& layer : m.layers) {
    Matrix x = load_matrix(existing(layer.path));
    if (x.cols() != layer.dim)
      throw Error(ErrorCode::SchemaViolation, "layer " + layer.name + " declares dim " + std::to_string(layer.dim) +
                                                  " but file has " + std::to_string(x.cols()) + " columns");
    if (x.rows() != n) throw Error(ErrorCode::RowCountMismatch, layer.name);
    ds.layers.push_back(std::move(x));
  }
  for (const auto& t : m.targets) {
    auto tv = load_target(existing(t.path), t.name, t.units);
    if (tv.values.size() != n) throw Error(ErrorCode::RowCountMismatch, t.name);
    ds.targets.push_back(std::move(tv));
  }
  if (m.channel_layout_path) existing(*m.channel_layout_path);
  return ds;
}

inline DatasetManifest load_manifest(const fs::path& path) { return load_dataset(path).manifest; }

}  // namespace probekit
