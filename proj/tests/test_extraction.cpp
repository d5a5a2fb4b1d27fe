#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "probekit/compfeat.hpp"
#include "probekit/extraction.hpp"
#include "probekit/random.hpp"

using namespace probekit;
using testing_util::code_of;
using testing_util::TempDir;

namespace {

// Deterministic stand-in for a model runtime: atom a of molecule m at width d gets
// features derived from (m, a, hook), with one row per atom in the formula.
class FakeRuntime : public ActivationSource {
 public:
  FakeRuntime(std::vector<std::string> formulas, std::map<std::string, Index> widths)
      : formulas_(std::move(formulas)), widths_(std::move(widths)) {}

  std::vector<std::string> available_hooks() const override {
    std::vector<std::string> out;
    for (const auto& [h, _] : widths_) out.push_back(h);
    return out;
  }

  Matrix atom_activations(Index molecule, const std::string& hook) override {
    ++calls;
    const Index atoms = parse_formula(formulas_[static_cast<std::size_t>(molecule)]).total();
    return testing_util::gaussian(atoms, widths_.at(hook), mix_seed(static_cast<std::uint64_t>(molecule), std::hash<std::string>{}(hook)));
  }

  int calls = 0;

 private:
  std::vector<std::string> formulas_;
  std::map<std::string, Index> widths_;
};

nlohmann::json registry_json() {
  return nlohmann::json::parse(R"({"models": {
    "mace_small": {"checkpoint": "ckpt/mace.model", "regime": "pretrained", "layers": [
      {"name": "interaction_0", "hook": "blocks.0", "dim": 8},
      {"name": "descriptors_final", "hook": "readout", "dim": 16}]},
    "schnet": {"checkpoint": "ckpt/schnet.pt", "layers": [{"name": "final", "hook": "embed", "dim": 4}]}}})");
}

std::vector<std::string> dataset_formulas(std::size_t n) {
  const std::vector<std::string> pool = {"CH4", "C2H6O", "C3H8", "CH2O", "C6H6", "NH3", "C2H3N", "CHF3", "C4H10O"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[(i * 7 + i / 3) % pool.size()]);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ProbeSet, MatchesLegacyNumpyPermutation) {
  // numpy.random.RandomState(seed).permutation(n)
  const RowSet ten = legacy_permutation(10, 42);
  EXPECT_EQ(ten, (RowSet{8, 1, 5, 0, 7, 2, 9, 4, 3, 6}));
  const RowSet seven = legacy_permutation(1000, 7);
  EXPECT_EQ(RowSet(seven.begin(), seven.begin() + 5), (RowSet{778, 334, 271, 802, 216}));
  const RowSet qm9 = probe_set_indices(133885, 2000, 42);
  ASSERT_EQ(qm9.size(), 2000u);
  EXPECT_EQ(RowSet(qm9.begin(), qm9.begin() + 8), (RowSet{3115, 117879, 23433, 61955, 98811, 9897, 115207, 58202}));
  EXPECT_EQ(qm9.back(), 113727);
  EXPECT_EQ(std::set<Index>(qm9.begin(), qm9.end()).size(), 2000u);
  EXPECT_EQ(code_of([] { probe_set_indices(10, 11, 42); }), ErrorCode::InvalidConfig);
}

TEST(MeanPool, EqualsPerMoleculeMean) {
  const std::vector<Index> atoms = {1, 3, 2};
  const Matrix f = testing_util::gaussian(6, 4, 3);
  const Matrix pooled = mean_pool(f, atoms);
  ASSERT_EQ(pooled.rows(), 3);
  EXPECT_LE((pooled.row(0) - f.row(0)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((pooled.row(1) - (f.row(1) + f.row(2) + f.row(3)) / 3.0).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((pooled.row(2) - (f.row(4) + f.row(5)) / 2.0).cwiseAbs().maxCoeff(), 1e-15);
  const std::vector<Index> wrong = {1, 3, 3}, empty = {1, 0, 5};
  EXPECT_EQ(code_of([&] { mean_pool(f, wrong); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { mean_pool(f, empty); }), ErrorCode::InvalidConfig);
}

TEST(Registry, ParsesAndReportsUnknownModels) {
  const auto reg = parse_registry(registry_json());
  ASSERT_EQ(reg.models.size(), 2u);
  const auto& mace = reg.at("mace_small");
  EXPECT_EQ(mace.checkpoint, "ckpt/mace.model");
  EXPECT_EQ(mace.regime, "pretrained");
  ASSERT_EQ(mace.layers.size(), 2u);
  EXPECT_EQ(mace.layers[1].dim, 16);
  try {
    reg.at("painn");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("mace_small, schnet"), std::string::npos);
  }
  EXPECT_EQ(code_of([] { parse_registry(nlohmann::json::parse(R"({"models": {"m": {"layers": []}}})")); }),
            ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] { parse_registry(nlohmann::json::parse(R"({"models": {"m": {"checkpoint": "c", "layers": []}}})")); }),
            ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] { parse_registry(nlohmann::json::array()); }), ErrorCode::SchemaViolation);
}

TEST(Extraction, WritesLoadableManifestWithPooledLayers) {
  TempDir dir;
  const auto formulas = dataset_formulas(300);
  Matrix props = testing_util::gaussian(300, 12, 5);
  FakeRuntime rt(formulas, {{"blocks.0", 8}, {"readout", 16}});
  const auto entry = parse_registry(registry_json()).at("mace_small");
  ExtractionJob job{"mace_small", {}, dir / "a", 120, 42};
  ExtractionInputs in{formulas, props, {{"gap", "eV"}}, ChannelLayout{{{0, 0, 4}, {1, 4, 4}}}};
  const auto manifest = run_extraction(job, entry, rt, in);

  const auto ds = load_dataset(manifest);
  EXPECT_EQ(ds.manifest.model_id, "mace_small");
  EXPECT_EQ(ds.manifest.regime, "pretrained");
  ASSERT_EQ(ds.manifest.layers.size(), 2u);
  EXPECT_EQ(ds.layer("descriptors_final").rows(), 120);
  EXPECT_EQ(ds.layer("descriptors_final").cols(), 16);
  EXPECT_EQ(ds.formulas.size(), 120u);
  EXPECT_EQ(ds.target("gap").units, "eV");
  EXPECT_EQ(ds.manifest.targets.size(), 4u);
  EXPECT_EQ(load_channel_layout(ds.manifest.resolve(*ds.manifest.channel_layout_path)).blocks.size(), 2u);

  // Rows follow the seeded probe set, and each is the mean over that molecule's atoms.
  const RowSet rows = probe_set_indices(300, 120, 42);
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const auto i = static_cast<Index>(uniform_below(rng, 120));
    const Index mol = rows[static_cast<std::size_t>(i)];
    EXPECT_EQ(ds.formulas[static_cast<std::size_t>(i)], formulas[static_cast<std::size_t>(mol)]);
    EXPECT_EQ(ds.target("gap").values(i), props(mol, 4));
    EXPECT_EQ(ds.target("dipole").values(i), props(mol, 0));
    const Matrix atoms = rt.atom_activations(mol, "readout");
    Vector manual = Vector::Zero(16);
    for (Index a = 0; a < atoms.rows(); ++a) manual += atoms.row(a).transpose();
    manual /= static_cast<double>(atoms.rows());
    EXPECT_LE((ds.layer("descriptors_final").row(i).transpose() - manual).cwiseAbs().maxCoeff(), 1e-12);
  }

  // A second identical run is byte-identical.
  job.out_dir = dir / "b";
  run_extraction(job, entry, rt, in);
  for (const char* f : {"interaction_0.pmat", "descriptors_final.pmat", "gap.pmat", "formulas.txt", "manifest.json"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(Extraction, HookAndShapeErrors) {
  TempDir dir;
  const auto formulas = dataset_formulas(50);
  const auto entry = parse_registry(registry_json()).at("mace_small");
  const ExtractionInputs in{formulas, testing_util::gaussian(50, 12, 1), {}, std::nullopt};

  FakeRuntime missing(formulas, {{"blocks.0", 8}, {"head", 16}});
  try {
    run_extraction({"mace_small", {}, dir / "x", 20, 42}, entry, missing, in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    EXPECT_NE(std::string(e.what()).find("available: blocks.0, head"), std::string::npos);
  }
  FakeRuntime ok(formulas, {{"blocks.0", 8}, {"readout", 16}});
  EXPECT_EQ(code_of([&] { run_extraction({"mace_small", {"nope"}, dir / "x", 20, 42}, entry, ok, in); }),
            ErrorCode::InvalidConfig);
  FakeRuntime narrow(formulas, {{"blocks.0", 8}, {"readout", 15}});
  EXPECT_EQ(code_of([&] { run_extraction({"mace_small", {"descriptors_final"}, dir / "x", 20, 42}, entry, narrow, in); }),
            ErrorCode::DimensionMismatch);
  const ExtractionInputs short_props{formulas, testing_util::gaussian(49, 12, 1), {}, std::nullopt};
  EXPECT_EQ(code_of([&] { run_extraction({"mace_small", {}, dir / "x", 20, 42}, entry, ok, short_props); }),
            ErrorCode::RowCountMismatch);

  // Selecting one layer only touches that hook.
  ok.calls = 0;
  const auto manifest = run_extraction({"mace_small", {"interaction_0"}, dir / "one", 20, 42}, entry, ok, in);
  EXPECT_EQ(ok.calls, 20);
  EXPECT_EQ(load_manifest(manifest).layers.size(), 1u);
}
