#pragma once

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "tmscm/ad/matrix.hpp"
#include "tmscm/graph.hpp"
#include "tmscm/scm.hpp"

namespace tmscm {

/// Order-respecting flattening ι of the nested index set {(i, j)}.
///
/// Public indices follow the 1-based convention of the formulas
/// (ι(i, j) = j + Σ_{k∈pr(i)} d_k, offsets l_i); storage is 0-based and
/// the `*_0` accessors expose it for array indexing.
class Vectorization {
 public:
  Vectorization() = default;
  Vectorization(const CausalGraph& graph, std::vector<NodeId> order);
  explicit Vectorization(const CausalGraph& graph) : Vectorization(graph, graph.order()) {}

  const std::vector<NodeId>& order() const { return order_; }
  std::size_t total_dim() const { return total_; }
  std::size_t dim(NodeId id) const { return dims_.at(id); }
  bool contains(NodeId id) const { return offsets_.count(id) != 0; }

  /// l_i (1-based).
  std::size_t offset(NodeId id) const;
  /// ι(i, j), both j and the result 1-based.
  std::size_t index(NodeId id, std::size_t j) const;
  /// ι⁻¹(t) for 1-based t.
  std::pair<NodeId, std::size_t> inverse_index(std::size_t t) const;

  std::size_t offset_0(NodeId id) const { return offset(id) - 1; }
  /// Node owning 0-based flat coordinate t.
  NodeId node_at_0(std::size_t t) const { return owner_.at(t); }

  Vec flatten(const NodeValues& values) const;
  NodeValues unflatten(const Vec& flat) const;

 private:
  std::vector<NodeId> order_;
  std::map<NodeId, std::size_t> dims_;
  std::map<NodeId, std::size_t> offsets_;  // 0-based
  std::vector<NodeId> owner_;
  std::size_t total_ = 0;
};

/// Flat view P_ι ∘ Γ ∘ P_ι⁻¹ of a bijective solution mapping. Inference
/// runs against this interface only, so ground-truth SCMs and every model
/// family share one code path.
class FlatSolutionMap {
 public:
  virtual ~FlatSolutionMap() = default;

  virtual const Vectorization& vectorization() const = 0;
  /// u (flat) -> v (flat).
  virtual Vec forward(const Vec& u) const = 0;
  /// v (flat) -> u (flat).
  virtual Vec inverse(const Vec& v) const = 0;

  // Row-batched forms; the defaults map rows independently in parallel.
  virtual ad::Matrix forward_batch(const ad::Matrix& u) const;
  virtual ad::Matrix inverse_batch(const ad::Matrix& v) const;
};

/// A recursive SCM with noise-invertible mechanisms viewed as a flat map.
class ScmSolutionMap final : public FlatSolutionMap {
 public:
  explicit ScmSolutionMap(const Scm& scm);
  ScmSolutionMap(const Scm& scm, std::vector<NodeId> order);

  const Vectorization& vectorization() const override { return vec_; }
  Vec forward(const Vec& u) const override;
  Vec inverse(const Vec& v) const override;
  const Scm& scm() const { return scm_; }

 private:
  Scm scm_;
  Vectorization vec_;
};

}  // namespace tmscm
