#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "tmscm/ad/matrix.hpp"
#include "tmscm/rng.hpp"

namespace tmscm::metrics {

using ad::Matrix;

struct SinkhornOptions {
  double blur = 0.05;  // ε = blur² for the ½‖x−y‖² cost
  double tolerance = 1e-6;
  int max_iterations = 500;
  bool parallel = true;  // false selects the serial reference kernels
};

struct OtSolve {
  double value = 0;  // OT_ε dual value
  int iterations = 0;
  double marginal_error = 0;
  bool converged = false;
  std::vector<double> trace;  // marginal error after each iteration
};

struct SinkhornResult {
  double divergence = 0;
  OtSolve xy, xx, yy;
};

/// Entropic OT between uniform empirical measures on the rows of x and y.
OtSolve entropic_ot(const Matrix& x, const Matrix& y, const SinkhornOptions& opts = {});

/// Debiased S_ε(α,β) = OT_ε(α,β) − ½OT_ε(α,α) − ½OT_ε(β,β).
SinkhornResult sinkhorn(const Matrix& x, const Matrix& y, const SinkhornOptions& opts = {});
double sinkhorn_divergence(const Matrix& x, const Matrix& y, const SinkhornOptions& opts = {});

/// √(mean of squared elementwise errors).
double ctf_rmse(const Matrix& pred, const Matrix& truth);

/// Exact ½·W₂² between two equal-size 1D samples by sorted pairing.
double w2_sorted_1d(std::vector<double> a, std::vector<double> b);

struct MetricsReport {
  double obs_wd = 0;
  double ctf_rmse = 0;
  double ctf_wd = 0;
  std::size_t n_obs_model = 0, n_obs_truth = 0, n_ctf = 0;
  double blur = 0.05;
  std::map<std::string, std::string> config;  // echoed key/value pairs

  bool valid() const;
};

std::string to_json(const MetricsReport& r);
MetricsReport report_from_json(const std::string& text);
std::string csv_header();
std::string to_csv_row(const MetricsReport& r);

}  // namespace tmscm::metrics
