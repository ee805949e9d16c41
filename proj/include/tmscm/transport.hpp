#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "tmscm/ad/matrix.hpp"
#include "tmscm/metrics.hpp"
#include "tmscm/scm.hpp"

namespace tmscm::tri {

/// A 1D distribution through its quantile function and CDF.
class Distribution1d {
 public:
  using Fn = std::function<double(double)>;

  Distribution1d(Fn quantile, Fn cdf) : quantile_(std::move(quantile)), cdf_(std::move(cdf)) {}

  static Distribution1d gaussian(double mean, double stddev);
  /// Midpoint-rank interpolation of order statistics, clamped at the
  /// extreme ranks. Rejects tied samples (flat quantile segments).
  static Distribution1d empirical(Vec samples);
  /// CDF obtained by bisection on a quantile function; the quantile is
  /// checked for strict increase on a probe grid.
  static Distribution1d from_quantile(Fn quantile);

  double quantile(double p) const { return quantile_(p); }
  double cdf(double x) const { return cdf_(x); }

 private:
  Fn quantile_, cdf_;
};

/// Q_target ∘ F_source.
std::function<double(double)> kr_transport_1d(const Distribution1d& source, const Distribution1d& target);

/// Knothe–Rosenblatt map between two sample clouds in d ≤ 3, built from
/// per-coordinate conditional empirical quantiles with the prefix binned
/// into `bins` equal-mass cells per coordinate.
class BinnedKr {
 public:
  BinnedKr(const ad::Matrix& source, const ad::Matrix& target, std::size_t bins = 8);
  Vec operator()(const Vec& x) const;
  std::size_t dim() const { return dim_; }

 private:
  std::size_t cell(const std::vector<Vec>& edges, const Vec& point, std::size_t upto) const;

  std::size_t dim_, bins_;
  std::vector<Vec> source_edges_, target_edges_;  // per coordinate interior bin edges
  // conditionals_[j][cell] holds (source quantiles, target quantiles) of coordinate j.
  std::vector<std::vector<std::pair<Distribution1d, Distribution1d>>> conditionals_;
};

/// y ↦ f(v′, f(v, ·)⁻¹(y)) for one mechanism.
class CtfTransportHandle {
 public:
  CtfTransportHandle(Mechanism mechanism, Vec source_parents, Vec target_parents);

  Vec operator()(std::span<const double> y) const;
  /// ξ(K) = ξ(f)⊙ξ(f), all +1 for a TM mechanism.
  Signature signature() const;
  TriangularMap as_map() const;

 private:
  Mechanism mech_;
  Vec v_, v2_;
};

CtfTransportHandle counterfactual_transport(const Mechanism& mech, const Vec& v, const Vec& v2);

struct MarkovCheckOptions {
  std::size_t samples = 512;
  metrics::SinkhornOptions sinkhorn;
};

/// Draws of U_i given pa(i) = v: the node's own distribution when the SCM is
/// Markovian, else the conditional sampler.
Vec sample_node_noise(const Scm& scm, NodeId node, std::span<const double> parents, Rng& rng);

/// Samples V_i | pa = v, pushes them through the transport handle, and
/// scores them against independent samples of V_i | pa = v′.
double markov_transport_check(const Scm& scm, NodeId node, const Vec& v, const Vec& v2, std::uint64_t seed,
                              const MarkovCheckOptions& opts = {});

/// Scores between pairs of independent sample sets of V_i | pa = v′.
std::vector<double> markov_null_scores(const Scm& scm, NodeId node, const Vec& v2, std::size_t replicates,
                                       std::uint64_t seed, const MarkovCheckOptions& opts = {});

/// Empirical p-quantile (linear interpolation between order statistics).
double percentile(std::vector<double> values, double p);

struct EiWitness {
  // h[k][s] = ĥ_{v_k}(u_s)
  std::vector<std::vector<Vec>> h;
  double dispersion = 0;          // max over u of the spread of ĥ_v(u) across v
  double identity_deviation = 0;  // max |ĥ_v(u) − u|
};

/// ĥ_v = f_B(v, ·)⁻¹ ∘ f_A(v, ·) on every (v, u) pair.
EiWitness ei_diagnostic(const Mechanism& a, const Mechanism& b, const std::vector<Vec>& parents,
                        const std::vector<Vec>& noise);

}  // namespace tmscm::tri
