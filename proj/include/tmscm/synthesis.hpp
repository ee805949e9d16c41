#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "tmscm/ad/matrix.hpp"
#include "tmscm/scm.hpp"
#include "tmscm/vectorize.hpp"

namespace tmscm::synth {

using ad::Matrix;

enum class MechanismKind { DiagAffine, TrilAffine };
enum class NoiseKind { StandardNormal, GaussianMixture };

std::string to_string(MechanismKind kind);
std::string to_string(NoiseKind kind);

/// Ground-truth family: Erdős–Rényi DAG over nodes 1..n (edges only from
/// lower to higher id), and per node
///   h = tanh(W1 v_pa + c1),  b = Wb h + cb,
///   log a_j = ls_j + ½ tanh((Ws h)_j),  ls_j ~ U[log ½, log 2],
///   v = b + a ⊙ u          (diag-affine)
///   v = b + L u, L_jj = a_j, L_jk = (Wl h + cl)_jk for k < j   (tril-affine)
/// with weights drawn U(-1, 1).
struct GeneratorConfig {
  std::size_t nodes = 5;
  double edge_prob = 0.5;
  std::vector<std::size_t> dims;  // per node; empty draws from [dim_min, dim_max]
  std::size_t dim_min = 1, dim_max = 3;
  MechanismKind mechanism = MechanismKind::DiagAffine;
  std::size_t embed_width = 8;
  NoiseKind noise = NoiseKind::StandardNormal;
  std::uint64_t seed = 0;

  void validate() const;
};

/// "er-diag", "er-tril", "tm-scm-sym" (desk-scale stand-ins for the
/// experiment families).
nlohmann::ordered_json generator_to_json(const GeneratorConfig& c);
/// InvalidConfig on unknown kinds or wrong types; a missing seed is 0.
GeneratorConfig generator_from_json(const nlohmann::json& j);

GeneratorConfig preset(const std::string& name);

Scm gen_ground_truth(const GeneratorConfig& config);

struct CounterfactualRecord {
  Vec factual;         // flat
  Intervention x;      // a single whole node
  Vec counterfactual;  // flat Γ_[x](u)
  Vec u;               // flat
};

struct DatasetSizes {
  std::size_t train = 1000;
  std::size_t test = 1000;
  std::size_t counterfactual = 200;
};

struct CounterfactualDataset {
  GeneratorConfig config;
  std::uint64_t seed = 0;
  CausalGraph graph;
  Vectorization vec;
  Matrix train, test;  // N × D, flat
  std::vector<CounterfactualRecord> records;
};

/// Observational rows are Γ(u) on fresh u (train row i on stream
/// (derive_seed(seed, 0), i), test on (derive_seed(seed, 1), i)).
/// Record k on stream (derive_seed(seed, 2), k) draws u, an intervened node
/// uniformly, and its value as that node's coordinates in Γ(u′) for an
/// independent u′ (a draw from the observational marginal).
CounterfactualDataset gen_dataset(const Scm& scm, const DatasetSizes& sizes, std::uint64_t seed);

/// Largest deviation of any stored record or row from re-solving it under
/// `scm` (fixed-point and submodel equations).
/// n rows of solve(scm, u), row i drawing u from the stream (seed, i).
Matrix sample_observational(const Scm& scm, const Vectorization& vec, std::size_t n, std::uint64_t seed);

double replay_error(const CounterfactualDataset& ds, const Scm& scm);

/// {"<node id>": [values...], ...}
nlohmann::ordered_json intervention_to_json(const Intervention& x);
Intervention intervention_from_json(const nlohmann::json& j);

/// manifest.json, train.f64, test.f64 (little-endian float64, row-major)
/// and cf.jsonl. The manifest records the generator config, graph,
/// vectorization, split shapes and per-file checksums.
/// `run` is stored under "run" in the manifest when non-null.
void write_dataset(const CounterfactualDataset& ds, const std::filesystem::path& dir,
                   const nlohmann::ordered_json& run = nullptr);
/// Checks every checksum (Io on mismatch).
CounterfactualDataset read_dataset(const std::filesystem::path& dir);

}  // namespace tmscm::synth
