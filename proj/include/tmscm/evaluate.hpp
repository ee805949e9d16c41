#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tmscm/metrics.hpp"
#include "tmscm/synthesis.hpp"
#include "tmscm/vectorize.hpp"

namespace tmscm::eval {

using ad::Matrix;

struct EvalOptions {
  double blur = 0.05;
  std::size_t n_obs = 1000;    // model samples and held-out rows compared for Obs_WD
  std::size_t max_ctf = 1000;  // counterfactual records used, from the front
  std::uint64_t seed = 0;      // model sampling stream
  bool parallel = true;
};

struct Evaluation {
  metrics::MetricsReport report;
  metrics::SinkhornResult obs, ctf;
  Matrix predictions;  // one counterfactual prediction per used record
};

/// Counterfactual outcome of every record's factual row under its intervention.
Matrix predict_counterfactuals(const FlatSolutionMap& map, const std::vector<synth::CounterfactualRecord>& records);
Matrix stored_counterfactuals(const std::vector<synth::CounterfactualRecord>& records);
Matrix stored_factuals(const std::vector<synth::CounterfactualRecord>& records);

/// Obs_WD of `model_samples` against the test split, and Ctf_RMSE / Ctf_WD of
/// the map's counterfactual predictions against the stored outcomes.
Evaluation evaluate(const FlatSolutionMap& map, const Matrix& model_samples, const synth::CounterfactualDataset& ds,
                    const EvalOptions& opts = {});

/// First `n` rows (or all of them).
Matrix head_rows(const Matrix& m, std::size_t n);

/// Long-format Sinkhorn convergence curves: metric,term,iteration,marginal_error.
std::string convergence_csv(const Evaluation& e);

}  // namespace tmscm::eval
