#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tmscm/models/ar_stack.hpp"
#include "tmscm/scm.hpp"

namespace tmscm::models {

enum class ExogenousKind { StandardNormal, GaussianMixture, Flow };

std::string to_string(ExogenousKind kind);
ExogenousKind exogenous_kind_from_string(const std::string& name);

struct ExogenousConfig {
  ExogenousKind kind = ExogenousKind::StandardNormal;
  std::size_t components = 3;                   // mixture
  std::size_t flow_layers = 2;                  // flow
  std::vector<std::size_t> flow_hidden{32, 32};  // flow
};

/// Product-form P_U over the flat exogenous vector; every kind factorizes
/// across nodes.
///
/// Mixture layout per node (d = node dim, K components): K logits, K·d means,
/// then K packed lower-triangular Cholesky factors (row-major, d(d+1)/2 each)
/// whose diagonal is stored as a log.
class ExogenousModel {
 public:
  ExogenousModel() = default;
  ExogenousModel(const Vectorization& vec, ExogenousConfig config, std::size_t offset);

  const ExogenousConfig& config() const { return config_; }
  std::size_t offset() const { return offset_; }
  std::size_t parameter_count() const { return end_ - offset_; }
  std::size_t end() const { return end_; }

  void initialize(Vec& theta, Rng& rng) const;

  Matrix log_prob(const ad::PlainParams& p, const Matrix& u) const;  // n×1
  Var log_prob(const ad::TapeParams& p, Var u) const;

  /// Row i uses the RNG stream (seed, i).
  Matrix sample(const Vec& theta, std::size_t n, std::uint64_t seed) const;

  double node_log_prob(const Vec& theta, NodeId node, std::span<const double> u) const;
  Vec sample_node(const Vec& theta, NodeId node, Rng& rng) const;
  /// Per-node distribution for the mechanism view; closures hold a copy of θ.
  NodeNoise node_noise(const Vec& theta, NodeId node) const;

 private:
  struct Block {
    NodeId node;
    std::size_t begin = 0, dim = 1, offset = 0;
  };

  template <class P>
  typename P::value_type log_prob_impl(const P& p, const typename P::value_type& u) const;
  template <class P>
  typename P::value_type mixture_node(const P& p, const Block& b, const typename P::value_type& u) const;

  const Block& block(NodeId node) const;
  std::size_t tri_size(std::size_t d) const { return d * (d + 1) / 2; }

  Vectorization vec_;
  ExogenousConfig config_;
  std::vector<Block> blocks_;
  AffineArStack flow_;
  std::size_t offset_ = 0, end_ = 0;
};

}  // namespace tmscm::models
