#include "tmscm/transport.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <boost/math/distributions/normal.hpp>

#include "tmscm/error.hpp"

namespace tmscm::tri {

Distribution1d Distribution1d::gaussian(double mean, double stddev) {
  require(stddev > 0 && std::isfinite(stddev), ErrorCode::DegenerateDistribution, "gaussian needs a positive scale");
  const boost::math::normal_distribution<double> d(mean, stddev);
  return Distribution1d([d](double p) { return boost::math::quantile(d, p); },
                        [d](double x) { return boost::math::cdf(d, x); });
}

Distribution1d Distribution1d::empirical(Vec samples) {
  require(samples.size() >= 2, ErrorCode::DegenerateDistribution, "empirical quantiles need two samples");
  std::sort(samples.begin(), samples.end());
  for (std::size_t k = 1; k < samples.size(); ++k)
    require(samples[k] > samples[k - 1], ErrorCode::DegenerateDistribution, "tied samples give a flat quantile");
  auto sorted = std::make_shared<const Vec>(std::move(samples));
  const double n = static_cast<double>(sorted->size());
  // Order statistic k (0-based) sits at probability (k + 0.5) / n.
  auto quantile = [sorted, n](double p) {
    const double r = std::clamp(p * n - 0.5, 0.0, n - 1.0);
    const auto k = static_cast<std::size_t>(std::floor(r));
    if (k + 1 >= sorted->size()) return sorted->back();
    const double w = r - static_cast<double>(k);
    return (1 - w) * (*sorted)[k] + w * (*sorted)[k + 1];
  };
  auto cdf = [sorted, n](double x) {
    const Vec& s = *sorted;
    if (x <= s.front()) return 0.5 / n;
    if (x >= s.back()) return 1.0 - 0.5 / n;
    const auto it = std::upper_bound(s.begin(), s.end(), x);
    const auto k = static_cast<std::size_t>(it - s.begin()) - 1;
    const double w = (x - s[k]) / (s[k + 1] - s[k]);
    return (static_cast<double>(k) + 0.5 + w) / n;
  };
  return Distribution1d(quantile, cdf);
}

Distribution1d Distribution1d::from_quantile(Fn quantile) {
  double prev = quantile(1e-6);
  for (int k = 1; k <= 1000; ++k) {
    const double cur = quantile(std::min(1e-6 + k * 1e-3, 1 - 1e-6));
    require(cur > prev, ErrorCode::DegenerateDistribution, "quantile function is not strictly increasing");
    prev = cur;
  }
  auto cdf = [quantile](double x) {
    double lo = 0, hi = 1;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      (quantile(mid) < x ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  return Distribution1d(quantile, cdf);
}

std::function<double(double)> kr_transport_1d(const Distribution1d& source, const Distribution1d& target) {
  return [source, target](double x) { return target.quantile(source.cdf(x)); };
}

namespace {

// Interior edges splitting `values` into `bins` equal-mass cells.
Vec equal_mass_edges(Vec values, std::size_t bins) {
  std::sort(values.begin(), values.end());
  Vec edges;
  for (std::size_t b = 1; b < bins; ++b) edges.push_back(values[b * values.size() / bins]);
  return edges;
}

std::size_t bin_of(const Vec& edges, double x) {
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
}

}  // namespace

BinnedKr::BinnedKr(const ad::Matrix& source, const ad::Matrix& target, std::size_t bins)
    : dim_(source.cols()), bins_(bins) {
  require(source.cols() == target.cols(), ErrorCode::DimMismatch, "KR samples differ in dimension");
  require(dim_ >= 1 && dim_ <= 3, ErrorCode::ConfigError, "binned KR supports 1 to 3 dimensions");
  require(bins_ >= 1, ErrorCode::ConfigError, "at least one bin is required");
  for (std::size_t j = 0; j < dim_; ++j) {
    Vec s(source.rows()), t(target.rows());
    for (std::size_t i = 0; i < source.rows(); ++i) s[i] = source(i, j);
    for (std::size_t i = 0; i < target.rows(); ++i) t[i] = target(i, j);
    source_edges_.push_back(equal_mass_edges(s, bins_));
    target_edges_.push_back(equal_mass_edges(t, bins_));
  }
  for (std::size_t j = 0; j < dim_; ++j) {
    std::size_t cells = 1;
    for (std::size_t k = 0; k < j; ++k) cells *= bins_;
    std::vector<Vec> s(cells), t(cells);
    for (std::size_t i = 0; i < source.rows(); ++i) {
      const Vec row(source.row_span(i).begin(), source.row_span(i).end());
      s[cell(source_edges_, row, j)].push_back(row[j]);
    }
    for (std::size_t i = 0; i < target.rows(); ++i) {
      const Vec row(target.row_span(i).begin(), target.row_span(i).end());
      t[cell(target_edges_, row, j)].push_back(row[j]);
    }
    std::vector<std::pair<Distribution1d, Distribution1d>> level;
    for (std::size_t c = 0; c < cells; ++c)
      level.emplace_back(Distribution1d::empirical(s[c]), Distribution1d::empirical(t[c]));
    conditionals_.push_back(std::move(level));
  }
}

std::size_t BinnedKr::cell(const std::vector<Vec>& edges, const Vec& point, std::size_t upto) const {
  std::size_t c = 0;
  for (std::size_t k = 0; k < upto; ++k) c = c * bins_ + bin_of(edges[k], point[k]);
  return c;
}

Vec BinnedKr::operator()(const Vec& x) const {
  require(x.size() == dim_, ErrorCode::DimMismatch, "KR input has the wrong dimension");
  Vec y(dim_);
  for (std::size_t j = 0; j < dim_; ++j) {
    const Distribution1d& src = conditionals_[j][cell(source_edges_, x, j)].first;
    // The target cell follows the already-transported prefix.
    const Distribution1d& tgt = conditionals_[j][cell(target_edges_, y, j)].second;
    y[j] = tgt.quantile(src.cdf(x[j]));
  }
  return y;
}

CtfTransportHandle::CtfTransportHandle(Mechanism mechanism, Vec source_parents, Vec target_parents)
    : mech_(std::move(mechanism)), v_(std::move(source_parents)), v2_(std::move(target_parents)) {}

Vec CtfTransportHandle::operator()(std::span<const double> y) const { return mech_(v2_, mech_.invert(v_, y)); }

Signature CtfTransportHandle::signature() const { return mech_.signature * mech_.signature; }

TriangularMap CtfTransportHandle::as_map() const {
  const CtfTransportHandle self = *this;
  return TriangularMap(mech_.dim, signature(), [self](std::size_t j, std::span<const double> x) {
    Vec padded(x.begin(), x.end());
    padded.resize(self.mech_.dim, 0.0);
    return self(padded)[j];
  });
}

CtfTransportHandle counterfactual_transport(const Mechanism& mech, const Vec& v, const Vec& v2) {
  require(mech.invertible_in_noise, ErrorCode::NotInvertible, "mechanism is not invertible in its noise");
  return CtfTransportHandle(mech, v, v2);
}

Vec sample_node_noise(const Scm& scm, NodeId node, std::span<const double> parents, Rng& rng) {
  const auto& exo = scm.exogenous();
  if (exo.conditional_sampler) return exo.conditional_sampler(node, parents, rng);
  auto it = exo.nodes.find(node);
  require(it != exo.nodes.end(), ErrorCode::NoSampler, "no noise distribution for node " + to_string(node));
  return it->second.sample(rng);
}

namespace {

ad::Matrix pushforward(const Scm& scm, const Mechanism& m, const Vec& parents, std::size_t n, std::uint64_t seed,
                       const CtfTransportHandle* transport) {
  ad::Matrix out(n, m.dim);
  for (std::size_t s = 0; s < n; ++s) {
    Rng rng = Rng::stream(seed, s);
    Vec v = m(parents, sample_node_noise(scm, m.node, parents, rng));
    if (transport) v = (*transport)(v);
    std::copy(v.begin(), v.end(), out.row_span(s).begin());
  }
  return out;
}

}  // namespace

double markov_transport_check(const Scm& scm, NodeId node, const Vec& v, const Vec& v2, std::uint64_t seed,
                              const MarkovCheckOptions& opts) {
  const Mechanism& m = scm.mechanism(node);
  const CtfTransportHandle k = counterfactual_transport(m, v, v2);
  const ad::Matrix moved = pushforward(scm, m, v, opts.samples, derive_seed(seed, 0), &k);
  const ad::Matrix direct = pushforward(scm, m, v2, opts.samples, derive_seed(seed, 1), nullptr);
  return metrics::sinkhorn_divergence(moved, direct, opts.sinkhorn);
}

std::vector<double> markov_null_scores(const Scm& scm, NodeId node, const Vec& v2, std::size_t replicates,
                                       std::uint64_t seed, const MarkovCheckOptions& opts) {
  const Mechanism& m = scm.mechanism(node);
  std::vector<double> scores;
  for (std::size_t r = 0; r < replicates; ++r) {
    const ad::Matrix a = pushforward(scm, m, v2, opts.samples, derive_seed(seed, 2 * r), nullptr);
    const ad::Matrix b = pushforward(scm, m, v2, opts.samples, derive_seed(seed, 2 * r + 1), nullptr);
    scores.push_back(metrics::sinkhorn_divergence(a, b, opts.sinkhorn));
  }
  return scores;
}

double percentile(std::vector<double> values, double p) {
  require(!values.empty(), ErrorCode::DegenerateDistribution, "percentile of nothing");
  std::sort(values.begin(), values.end());
  const double r = std::clamp(p, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto k = static_cast<std::size_t>(std::floor(r));
  if (k + 1 >= values.size()) return values.back();
  return values[k] + (r - static_cast<double>(k)) * (values[k + 1] - values[k]);
}

EiWitness ei_diagnostic(const Mechanism& a, const Mechanism& b, const std::vector<Vec>& parents,
                        const std::vector<Vec>& noise) {
  require(a.invertible_in_noise && b.invertible_in_noise, ErrorCode::NotInvertible,
          "both mechanisms must be invertible in their noise");
  require(a.dim == b.dim, ErrorCode::DimMismatch, "mechanisms differ in node dimension");
  EiWitness w;
  for (const Vec& v : parents) {
    std::vector<Vec> row;
    for (const Vec& u : noise) {
      Vec h = b.invert(v, a(v, u));
      for (std::size_t j = 0; j < h.size(); ++j) w.identity_deviation = std::max(w.identity_deviation, std::abs(h[j] - u[j]));
      row.push_back(std::move(h));
    }
    w.h.push_back(std::move(row));
  }
  for (std::size_t s = 0; s < noise.size(); ++s)
    for (std::size_t j = 0; j < a.dim; ++j) {
      double lo = w.h[0][s][j], hi = lo;
      for (const auto& row : w.h) {
        lo = std::min(lo, row[s][j]);
        hi = std::max(hi, row[s][j]);
      }
      w.dispersion = std::max(w.dispersion, hi - lo);
    }
  return w;
}

}  // namespace tmscm::tri
