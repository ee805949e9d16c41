#include "tmscm/models/exogenous.hpp"

#include <cmath>
#include <memory>
#include <numbers>

#include "tmscm/error.hpp"

namespace tmscm::models {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

template <class T>
T standard_normal_log_prob(const T& u) {
  return square(u) * -0.5 - 0.5 * kLog2Pi;
}

}  // namespace

std::string to_string(ExogenousKind kind) {
  switch (kind) {
    case ExogenousKind::StandardNormal: return "standard-normal";
    case ExogenousKind::GaussianMixture: return "gaussian-mixture";
    case ExogenousKind::Flow: return "autoregressive-flow";
  }
  return "?";
}

ExogenousKind exogenous_kind_from_string(const std::string& name) {
  for (auto k : {ExogenousKind::StandardNormal, ExogenousKind::GaussianMixture, ExogenousKind::Flow})
    if (to_string(k) == name) return k;
  fail(ErrorCode::ConfigError, "unknown exogenous kind '" + name + "'");
}

ExogenousModel::ExogenousModel(const Vectorization& vec, ExogenousConfig config, std::size_t offset)
    : vec_(vec), config_(std::move(config)), offset_(offset), end_(offset) {
  for (NodeId id : vec_.order()) {
    Block b{id, vec_.offset_0(id), vec_.dim(id), end_};
    if (config_.kind == ExogenousKind::GaussianMixture) {
      require(config_.components >= 1, ErrorCode::ConfigError, "mixture needs at least one component");
      const std::size_t k = config_.components;
      end_ += k + k * b.dim + k * tri_size(b.dim);
    }
    blocks_.push_back(b);
  }
  if (config_.kind == ExogenousKind::Flow) {
    flow_ = AffineArStack(within_node_admissibility(vec_), config_.flow_layers, config_.flow_hidden, end_);
    end_ = flow_.end();
  }
}

const ExogenousModel::Block& ExogenousModel::block(NodeId node) const {
  for (const auto& b : blocks_)
    if (b.node == node) return b;
  fail(ErrorCode::UnknownNode, "no exogenous block for node " + tmscm::to_string(node));
}

void ExogenousModel::initialize(Vec& theta, Rng& rng) const {
  if (config_.kind == ExogenousKind::Flow) flow_.initialize(theta, rng);
  if (config_.kind != ExogenousKind::GaussianMixture) return;
  const std::size_t k = config_.components;
  for (const auto& b : blocks_) {
    std::size_t at = b.offset;
    for (std::size_t c = 0; c < k; ++c) theta[at++] = 0.0;
    for (std::size_t c = 0; c < k * b.dim; ++c) theta[at++] = rng.normal();
    for (std::size_t c = 0; c < k * tri_size(b.dim); ++c) theta[at++] = 0.0;
  }
}

template <class P>
typename P::value_type ExogenousModel::mixture_node(const P& p, const Block& b,
                                                    const typename P::value_type& u) const {
  using T = typename P::value_type;
  const std::size_t k = config_.components, d = b.dim;
  const T logits = p.get(b.offset, 1, k);
  const T log_w = logits - logsumexp_rows(logits);
  std::vector<T> terms;
  for (std::size_t c = 0; c < k; ++c) {
    const T mu = p.get(b.offset + k + c * d, 1, d);
    const std::size_t chol = b.offset + k + k * d + c * tri_size(d);
    // Forward substitution L w = u - μ, one column at a time.
    const T r = u - mu;
    std::vector<T> w;
    T log_diag_sum = p.lift(Matrix(1, 1, 0.0));
    T quad = p.lift(Matrix(value_of(u).rows(), 1, 0.0));
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t row = chol + j * (j + 1) / 2;
      T acc = col(r, j);
      for (std::size_t l = 0; l < j; ++l) acc = acc - w[l] * p.get(row + l, 1, 1);
      const T log_ljj = p.get(row + j, 1, 1);
      w.push_back(acc * exp(-log_ljj));
      quad = quad + square(w.back());
      log_diag_sum = log_diag_sum + log_ljj;
    }
    terms.push_back(quad * -0.5 - log_diag_sum - 0.5 * static_cast<double>(d) * kLog2Pi + col(log_w, c));
  }
  return logsumexp_rows(hcat(terms));
}

template <class P>
typename P::value_type ExogenousModel::log_prob_impl(const P& p, const typename P::value_type& u) const {
  require(value_of(u).cols() == vec_.total_dim(), ErrorCode::DimMismatch, "exogenous input has the wrong dimension");
  switch (config_.kind) {
    case ExogenousKind::StandardNormal: return row_sum(standard_normal_log_prob(u));
    case ExogenousKind::Flow: {
      const auto [z, logdet] = flow_.inverse(p, u);
      return row_sum(standard_normal_log_prob(z) + logdet);
    }
    case ExogenousKind::GaussianMixture: {
      std::vector<typename P::value_type> parts;
      for (const auto& b : blocks_) parts.push_back(mixture_node(p, b, cols(u, b.begin, b.dim)));
      return row_sum(hcat(parts));
    }
  }
  fail(ErrorCode::ConfigError, "unknown exogenous kind");
}

Matrix ExogenousModel::log_prob(const ad::PlainParams& p, const Matrix& u) const { return log_prob_impl(p, u); }

Var ExogenousModel::log_prob(const ad::TapeParams& p, Var u) const { return log_prob_impl(p, u); }

Vec ExogenousModel::sample_node(const Vec& theta, NodeId node, Rng& rng) const {
  const Block& b = block(node);
  switch (config_.kind) {
    case ExogenousKind::StandardNormal: return rng.normal_vector(b.dim);
    case ExogenousKind::Flow: {
      Matrix z(1, vec_.total_dim());
      for (std::size_t j = 0; j < b.dim; ++j) z(0, b.begin + j) = rng.normal();
      const Matrix u = flow_.forward(theta, z);
      return Vec(u.storage().begin() + static_cast<std::ptrdiff_t>(b.begin),
                 u.storage().begin() + static_cast<std::ptrdiff_t>(b.begin + b.dim));
    }
    case ExogenousKind::GaussianMixture: {
      const std::size_t k = config_.components, d = b.dim;
      double top = theta[b.offset];
      for (std::size_t c = 1; c < k; ++c) top = std::max(top, theta[b.offset + c]);
      Vec w(k);
      double total = 0;
      for (std::size_t c = 0; c < k; ++c) total += w[c] = std::exp(theta[b.offset + c] - top);
      double r = rng.uniform() * total;
      std::size_t c = 0;
      while (c + 1 < k && r >= w[c]) r -= w[c++];
      const Vec z = rng.normal_vector(d);
      const std::size_t chol = b.offset + k + k * d + c * tri_size(d);
      Vec u(d);
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t row = chol + j * (j + 1) / 2;
        double s = theta[b.offset + k + c * d + j];
        for (std::size_t l = 0; l < j; ++l) s += theta[row + l] * z[l];
        u[j] = s + std::exp(theta[row + j]) * z[j];
      }
      return u;
    }
  }
  fail(ErrorCode::ConfigError, "unknown exogenous kind");
}

Matrix ExogenousModel::sample(const Vec& theta, std::size_t n, std::uint64_t seed) const {
  const std::size_t dim = vec_.total_dim();
  Matrix u(n, dim);
  if (config_.kind == ExogenousKind::Flow) {
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng = Rng::stream(seed, i);
      for (std::size_t j = 0; j < dim; ++j) u(i, j) = rng.normal();
    }
    return flow_.forward(theta, u);
  }
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    for (const auto& b : blocks_) {
      const Vec x = sample_node(theta, b.node, rng);
      std::copy(x.begin(), x.end(), u.row_span(i).begin() + static_cast<std::ptrdiff_t>(b.begin));
    }
  }
  return u;
}

double ExogenousModel::node_log_prob(const Vec& theta, NodeId node, std::span<const double> u) const {
  const Block& b = block(node);
  require(u.size() == b.dim, ErrorCode::DimMismatch, "node exogenous value has the wrong dimension");
  const ad::PlainParams p(theta);
  switch (config_.kind) {
    case ExogenousKind::StandardNormal: return row_sum(standard_normal_log_prob(Matrix::row(u))).item();
    case ExogenousKind::GaussianMixture: return mixture_node(p, b, Matrix::row(u)).item();
    case ExogenousKind::Flow: {
      // The stack is block-diagonal, so the other blocks can be left at zero.
      Matrix full(1, vec_.total_dim());
      std::copy(u.begin(), u.end(), full.row_span(0).begin() + static_cast<std::ptrdiff_t>(b.begin));
      const auto [z, logdet] = flow_.inverse(p, full);
      return row_sum(cols(standard_normal_log_prob(z) + logdet, b.begin, b.dim)).item();
    }
  }
  fail(ErrorCode::ConfigError, "unknown exogenous kind");
}

NodeNoise ExogenousModel::node_noise(const Vec& theta, NodeId node) const {
  const Block& b = block(node);
  if (config_.kind == ExogenousKind::StandardNormal) return NodeNoise::standard_normal(b.dim);
  auto self = std::make_shared<const ExogenousModel>(*this);
  auto params = std::make_shared<const Vec>(theta);
  return NodeNoise::custom(
      b.dim, [self, params, node](Rng& rng) { return self->sample_node(*params, node, rng); },
      [self, params, node](std::span<const double> u) { return self->node_log_prob(*params, node, u); });
}

}  // namespace tmscm::models
