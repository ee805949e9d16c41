#include "tmscm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "tmscm/error.hpp"
#include "tmscm/kernels.hpp"

namespace tmscm::metrics {

namespace {

struct Softmin {
  bool parallel;
  double eps;

  // out_i = -ε log Σ_j w_j exp((g_j - C(x_i, y_j)) / ε)
  void operator()(const Matrix& x, const Matrix& y, const Vec& g, const Vec& log_w, Vec& out) const {
    if (parallel)
      kernels::parallel::softmin(x.data(), x.rows(), y.data(), y.rows(), x.cols(), g, log_w, eps, out);
    else
      kernels::serial::softmin(x.data(), x.rows(), y.data(), y.rows(), x.cols(), g, log_w, eps, out);
  }
};

double average(const Vec& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Σ_i a_i |exp((f_i - t_i)/ε) - 1|: the L1 gap between the plan's row
// marginal and a, given t = softmin of the other potential.
double marginal_gap(const Vec& f, const Vec& t, double eps) {
  double s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::abs(std::exp((f[i] - t[i]) / eps) - 1.0);
  return s / static_cast<double>(f.size());
}

void check_inputs(const Matrix& x, const Matrix& y) {
  require(x.rows() > 0 && y.rows() > 0, ErrorCode::DegenerateDistribution, "sinkhorn needs non-empty sample sets");
  require(x.cols() == y.cols(), ErrorCode::DimMismatch, "sinkhorn inputs differ in dimension");
  for (double v : x.data()) require(std::isfinite(v), ErrorCode::NonFinite, "non-finite sample");
  for (double v : y.data()) require(std::isfinite(v), ErrorCode::NonFinite, "non-finite sample");
}

// Squared diameter of the bounding box of both sample sets.
double squared_diameter(const Matrix& x, const Matrix& y) {
  double total = 0;
  for (std::size_t q = 0; q < x.cols(); ++q) {
    double lo = x(0, q), hi = x(0, q);
    for (const Matrix* m : {&x, &y})
      for (std::size_t i = 0; i < m->rows(); ++i) {
        lo = std::min(lo, (*m)(i, q));
        hi = std::max(hi, (*m)(i, q));
      }
    total += (hi - lo) * (hi - lo);
  }
  return total;
}

// Annealing levels from the squared diameter down to (excluding) the target,
// each a factor 4 apart; they only warm-start the potentials.
std::vector<double> warm_start_levels(double diameter2, double target) {
  std::vector<double> levels;
  for (double e = diameter2; e > target; e *= 0.25) levels.push_back(e);
  return levels;
}

// Symmetric problem OT_ε(α, α) with averaged fixed-point updates.
OtSolve self_ot(const Matrix& x, const SinkhornOptions& opts) {
  const double eps = opts.blur * opts.blur;
  const std::size_t n = x.rows();
  const Vec log_w(n, -std::log(static_cast<double>(n)));
  Vec p(n, 0.0), t(n);
  for (double e : warm_start_levels(squared_diameter(x, x), eps)) {
    Softmin{opts.parallel, e}(x, x, p, log_w, t);
    for (std::size_t i = 0; i < n; ++i) p[i] = 0.5 * (p[i] + t[i]);
  }
  const Softmin softmin{opts.parallel, eps};
  OtSolve out;
  for (out.iterations = 1; out.iterations <= opts.max_iterations; ++out.iterations) {
    softmin(x, x, p, log_w, t);
    out.marginal_error = marginal_gap(p, t, eps);
    out.trace.push_back(out.marginal_error);
    if (out.marginal_error < opts.tolerance) {
      out.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) p[i] = 0.5 * (p[i] + t[i]);
  }
  out.iterations = std::min(out.iterations, opts.max_iterations);
  out.value = 2.0 * average(p);
  return out;
}

}  // namespace

OtSolve entropic_ot(const Matrix& x, const Matrix& y, const SinkhornOptions& opts) {
  check_inputs(x, y);
  const double eps = opts.blur * opts.blur;
  require(eps > 0, ErrorCode::ConfigError, "blur must be positive");
  const Vec log_a(x.rows(), -std::log(static_cast<double>(x.rows())));
  const Vec log_b(y.rows(), -std::log(static_cast<double>(y.rows())));
  Vec f(x.rows(), 0.0), g(y.rows(), 0.0), t(x.rows());
  for (double e : warm_start_levels(squared_diameter(x, y), eps)) {
    const Softmin level{opts.parallel, e};
    level(y, x, f, log_a, g);
    level(x, y, g, log_b, f);
  }
  const Softmin softmin{opts.parallel, eps};
  OtSolve out;
  // Alternating updates: after each g update the column marginal is exact,
  // so the row gap measures the whole constraint violation.
  softmin(y, x, f, log_a, g);
  for (out.iterations = 1; out.iterations <= opts.max_iterations; ++out.iterations) {
    softmin(x, y, g, log_b, t);
    out.marginal_error = marginal_gap(f, t, eps);
    out.trace.push_back(out.marginal_error);
    f = t;
    if (out.marginal_error < opts.tolerance) {
      out.converged = true;
      break;
    }
    softmin(y, x, f, log_a, g);
  }
  out.iterations = std::min(out.iterations, opts.max_iterations);
  out.value = average(f) + average(g);
  return out;
}

SinkhornResult sinkhorn(const Matrix& x, const Matrix& y, const SinkhornOptions& opts) {
  check_inputs(x, y);
  SinkhornResult r;
  r.xy = entropic_ot(x, y, opts);
  r.xx = self_ot(x, opts);
  r.yy = self_ot(y, opts);
  r.divergence = std::max(0.0, r.xy.value - 0.5 * r.xx.value - 0.5 * r.yy.value);
  return r;
}

double sinkhorn_divergence(const Matrix& x, const Matrix& y, const SinkhornOptions& opts) {
  return sinkhorn(x, y, opts).divergence;
}

double ctf_rmse(const Matrix& pred, const Matrix& truth) {
  require(pred.same_shape(truth), ErrorCode::ShapeMismatch, "ctf_rmse: shapes differ");
  require(pred.size() > 0, ErrorCode::ShapeMismatch, "ctf_rmse: empty input");
  double s = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) s += (pred[k] - truth[k]) * (pred[k] - truth[k]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

double w2_sorted_1d(std::vector<double> a, std::vector<double> b) {
  require(a.size() == b.size() && !a.empty(), ErrorCode::ShapeMismatch, "sorted pairing needs equal sizes");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += 0.5 * (a[k] - b[k]) * (a[k] - b[k]);
  return s / static_cast<double>(a.size());
}

bool MetricsReport::valid() const {
  for (double v : {obs_wd, ctf_rmse, ctf_wd})
    if (!std::isfinite(v) || v < 0) return false;
  return true;
}

std::string to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["obs_wd"] = r.obs_wd;
  j["ctf_rmse"] = r.ctf_rmse;
  j["ctf_wd"] = r.ctf_wd;
  j["n_obs_model"] = r.n_obs_model;
  j["n_obs_truth"] = r.n_obs_truth;
  j["n_ctf"] = r.n_ctf;
  j["blur"] = r.blur;
  j["config"] = r.config;
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  MetricsReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.obs_wd = j.at("obs_wd").get<double>();
    r.ctf_rmse = j.at("ctf_rmse").get<double>();
    r.ctf_wd = j.at("ctf_wd").get<double>();
    r.n_obs_model = j.at("n_obs_model").get<std::size_t>();
    r.n_obs_truth = j.at("n_obs_truth").get<std::size_t>();
    r.n_ctf = j.at("n_ctf").get<std::size_t>();
    r.blur = j.at("blur").get<double>();
    r.config = j.value("config", std::map<std::string, std::string>{});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("metrics report: ") + e.what());
  }
  require(r.valid(), ErrorCode::InvalidConfig, "metrics report holds negative or non-finite values");
  return r;
}

std::string csv_header() { return "obs_wd,ctf_rmse,ctf_wd,n_obs_model,n_obs_truth,n_ctf,blur\n"; }

std::string to_csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os << std::setprecision(17) << r.obs_wd << ',' << r.ctf_rmse << ',' << r.ctf_wd << ',' << r.n_obs_model << ','
     << r.n_obs_truth << ',' << r.n_ctf << ',' << r.blur << '\n';
  return os.str();
}

}  // namespace tmscm::metrics
