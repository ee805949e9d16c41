#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "tmscm/ad/mlp.hpp"
#include "tmscm/graph.hpp"
#include "tmscm/vectorize.hpp"

namespace tmscm::models {

using ad::Matrix;
using ad::Var;

/// adm[t][s]: flat coordinate s may condition coordinate t. Only s < t is
/// ever admissible.
using Admissibility = std::vector<std::vector<bool>>;

/// Earlier coordinates of the same node and every coordinate of a parent node.
Admissibility causal_admissibility(const CausalGraph& graph, const Vectorization& vec);
/// Earlier coordinates of the same node only (block-diagonal stack).
Admissibility within_node_admissibility(const Vectorization& vec);

/// Per-layer 0/1 weight masks for an MLP over the flat vector whose outputs
/// are [s; b] (2D), such that output t only sees inputs admissible for t.
std::vector<Matrix> autoregressive_masks(const Admissibility& adm, const std::vector<std::size_t>& hidden);

/// Γ = T_1 ∘ … ∘ T_L with affine autoregressive layers
///   T(x)_t = b_t(y_<t) + exp(s_t(y_<t)) x_t,  y = T(x),
/// where (s, b) come from a masked MLP over the output prefix. The inverse
/// is one pass per layer; the forward is sequential over coordinates.
class AffineArStack {
 public:
  AffineArStack() = default;
  AffineArStack(Admissibility adm, std::size_t layers, std::vector<std::size_t> hidden, std::size_t offset);

  std::size_t dim() const { return dim_; }
  std::size_t layers() const { return nets_.size(); }
  std::size_t offset() const { return offset_; }
  std::size_t parameter_count() const { return end_ - offset_; }
  std::size_t end() const { return end_; }
  const ad::Mlp& net(std::size_t l) const { return nets_[l]; }

  /// Zeroed output layers: every T starts as the identity.
  void initialize(Vec& theta, Rng& rng) const;

  Matrix forward(const Vec& theta, const Matrix& x) const;

  /// (x, per-coordinate log|∂x_t/∂y_t|) for y = Γ(x); both n×D.
  std::pair<Matrix, Matrix> inverse(const ad::PlainParams& p, const Matrix& y) const;
  std::pair<Var, Var> inverse(const ad::TapeParams& p, Var y) const;

 private:
  template <class P>
  std::pair<typename P::value_type, typename P::value_type> inverse_impl(const P& p,
                                                                         typename P::value_type y) const;

  std::size_t dim_ = 0, offset_ = 0, end_ = 0;
  std::vector<ad::Mlp> nets_;
};

}  // namespace tmscm::models
