#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tmscm/models/exogenous.hpp"
#include "tmscm/scm.hpp"
#include "tmscm/vectorize.hpp"

namespace tmscm::models {

enum class Family { Dnme, Tnme, Cmsm, Tvsm };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

struct ModelConfig {
  Family family = Family::Dnme;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t layers = 0;  // CMSM; 0 selects diameter + 1
  std::size_t ode_steps = 32;
  double tnme_epsilon = 1e-6;
  /// Condition on every predecessor in the causal order instead of the
  /// graph's parents.
  bool order_only = false;
  ExogenousConfig exogenous;
};

/// A TM-SCM with learnable solution mapping Γ_θ.
///
/// θ holds the core parameters followed by the exogenous parameters. Data
/// enter through a fixed per-coordinate standardization, so
/// Γ(u) = mean + scale ⊙ Γ_core(u); the affine wrapper is increasing and
/// diagonal and keeps Γ a TM map.
class TmScmModel : public FlatSolutionMap {
 public:
  static std::unique_ptr<TmScmModel> create(const CausalGraph& graph, const ModelConfig& config);
  virtual std::unique_ptr<TmScmModel> clone() const = 0;

  const ModelConfig& config() const { return config_; }
  Family family() const { return config_.family; }
  const CausalGraph& graph() const { return graph_; }
  const CausalGraph& conditioning_graph() const { return cond_; }
  const Vectorization& vectorization() const override { return vec_; }
  std::size_t dim() const { return vec_.total_dim(); }

  std::size_t parameter_count() const { return theta_.size(); }
  std::size_t core_parameter_count() const { return core_count_; }
  const Vec& parameters() const { return theta_; }
  void set_parameters(Vec theta);
  /// Seeded initialization; the core starts at (or near) the identity.
  void initialize(std::uint64_t seed);

  void set_standardization(Vec mean, Vec scale);
  /// Column means and standard deviations of the training data.
  void fit_standardization(const Matrix& v);
  const Vec& mean() const { return mean_; }
  const Vec& scale() const { return scale_; }

  const ExogenousModel& exogenous() const { return exo_; }

  Vec forward(const Vec& u) const override;
  Vec inverse(const Vec& v) const override;
  Matrix forward_batch(const Matrix& u) const override;
  Matrix inverse_batch(const Matrix& v) const override;

  /// log|det ∂Γ⁻¹/∂v| per row (n×1).
  Matrix log_det_inverse(const Matrix& v) const;
  /// log p_U(Γ⁻¹(v)) + log|det ∂Γ⁻¹/∂v| per row.
  Matrix log_prob(const Matrix& v) const;
  Matrix log_prob_at(const Vec& theta, const Matrix& v) const;
  /// Mean negative log-likelihood; NonFinite names the first bad row.
  double nll(const Matrix& v) const;
  /// NLL at θ and its gradient.
  ad::GradResult nll_grad(const Matrix& v) const;
  ad::GradResult nll_grad(const Matrix& v, const Vec& theta) const;

  Matrix sample_exogenous(std::size_t n, std::uint64_t seed) const;
  Matrix sample(std::size_t n, std::uint64_t seed) const;

  /// Explicit mechanisms (DNME, TNME) as a ground-truth-style SCM.
  virtual std::optional<Scm> as_scm() const { return std::nullopt; }

 protected:
  TmScmModel(const CausalGraph& graph, ModelConfig config);
  /// Places the exogenous block after `core_count` core parameters.
  void finalize_layout(std::size_t core_count);

  virtual void initialize_core(Vec& theta, Rng& rng) const = 0;
  virtual Matrix core_forward(const Vec& theta, const Matrix& u) const = 0;
  /// (u, log|det ∂u/∂z| n×1) for standardized data z.
  virtual std::pair<Matrix, Matrix> core_inverse(const ad::PlainParams& p, const Matrix& z) const = 0;
  virtual std::pair<Var, Var> core_inverse(const ad::TapeParams& p, const Matrix& z) const = 0;

  Matrix standardize(const Matrix& v) const;
  Matrix destandardize(const Matrix& z) const;
  double log_scale_sum() const;

  CausalGraph graph_, cond_;
  Vectorization vec_;
  ModelConfig config_;
  Vec theta_, mean_, scale_;
  ExogenousModel exo_;
  std::size_t core_count_ = 0;
};

/// Shared machinery of the mechanism-based families: one MLP per node maps
/// the node's standardized parents to the parameters of an affine map in
/// the node's noise.
class MechanismModel : public TmScmModel {
 public:
  std::optional<Scm> as_scm() const override;

  /// Raw head output of node `node` for standardized parent rows.
  Matrix head(const Vec& theta, NodeId node, const Matrix& parents) const;
  virtual Matrix node_forward(const Matrix& head, const Matrix& u) const = 0;
  virtual std::pair<Matrix, Matrix> node_inverse(const Matrix& head, const Matrix& z) const = 0;
  virtual std::pair<Var, Var> node_inverse(Var head, Var z) const = 0;

 protected:
  MechanismModel(const CausalGraph& graph, ModelConfig config);
  /// Builds the per-node networks; `head_width(d)` is the output width.
  void build(std::size_t (*head_width)(std::size_t));

  void initialize_core(Vec& theta, Rng& rng) const override;
  Matrix core_forward(const Vec& theta, const Matrix& u) const override;
  std::pair<Matrix, Matrix> core_inverse(const ad::PlainParams& p, const Matrix& z) const override;
  std::pair<Var, Var> core_inverse(const ad::TapeParams& p, const Matrix& z) const override;

  struct NodeNet {
    NodeId node;
    std::size_t begin = 0, dim = 1;
    std::vector<std::pair<std::size_t, std::size_t>> parent_blocks;  // (flat begin, dim), ascending parent id
    ad::Mlp net;
  };
  const NodeNet& node_net(NodeId node) const;
  Matrix parent_input(const NodeNet& n, const Matrix& z) const;

  template <class P>
  std::pair<typename P::value_type, typename P::value_type> inverse_impl(const P& p, const Matrix& z) const;

  std::vector<NodeNet> nets_;
};

/// v_i = b(v_pa) + exp(a(v_pa)) ⊙ u_i.
class DnmeModel final : public MechanismModel {
 public:
  DnmeModel(const CausalGraph& graph, ModelConfig config);
  std::unique_ptr<TmScmModel> clone() const override { return std::make_unique<DnmeModel>(*this); }

  Matrix node_forward(const Matrix& head, const Matrix& u) const override;
  std::pair<Matrix, Matrix> node_inverse(const Matrix& head, const Matrix& z) const override;
  std::pair<Var, Var> node_inverse(Var head, Var z) const override;
};

/// v_i = b(v_pa) + tril(exp(A(v_pa) + ε)) u_i; the head emits A row-major
/// (d·d) then b (d).
class TnmeModel final : public MechanismModel {
 public:
  TnmeModel(const CausalGraph& graph, ModelConfig config);
  std::unique_ptr<TmScmModel> clone() const override { return std::make_unique<TnmeModel>(*this); }

  Matrix node_forward(const Matrix& head, const Matrix& u) const override;
  std::pair<Matrix, Matrix> node_inverse(const Matrix& head, const Matrix& z) const override;
  std::pair<Var, Var> node_inverse(Var head, Var z) const override;

 protected:
  void initialize_core(Vec& theta, Rng& rng) const override;

 private:
  template <class T>
  std::pair<T, T> inverse_t(const T& head, const T& z) const;
};

/// Γ_core = T_1 ∘ … ∘ T_L over the flat vector with causally masked
/// affine autoregressive layers.
class CmsmModel final : public TmScmModel {
 public:
  CmsmModel(const CausalGraph& graph, ModelConfig config);
  std::unique_ptr<TmScmModel> clone() const override { return std::make_unique<CmsmModel>(*this); }
  const AffineArStack& stack() const { return stack_; }

 protected:
  void initialize_core(Vec& theta, Rng& rng) const override;
  Matrix core_forward(const Vec& theta, const Matrix& u) const override;
  std::pair<Matrix, Matrix> core_inverse(const ad::PlainParams& p, const Matrix& z) const override;
  std::pair<Var, Var> core_inverse(const ad::TapeParams& p, const Matrix& z) const override;

 private:
  AffineArStack stack_;
};

/// Γ_core is the time-1 flow of dx/dt = v(x, t) with
///   v(x, t) = (U ⊙ σ(G) ⊙ M) tanh((W ⊙ M) x + b),
/// (W, b, U, G) = MLP(t) and M the causal lower-triangular mask.
/// Integrated with fixed-step RK4.
class TvsmModel final : public TmScmModel {
 public:
  TvsmModel(const CausalGraph& graph, ModelConfig config);
  std::unique_ptr<TmScmModel> clone() const override { return std::make_unique<TvsmModel>(*this); }

  const Matrix& mask() const { return mask_; }
  const ad::Mlp& time_net() const { return net_; }
  /// Velocity at (x, t) for plain evaluation.
  Matrix velocity(const Vec& theta, const Matrix& x, double t) const;

 protected:
  void initialize_core(Vec& theta, Rng& rng) const override;
  Matrix core_forward(const Vec& theta, const Matrix& u) const override;
  std::pair<Matrix, Matrix> core_inverse(const ad::PlainParams& p, const Matrix& z) const override;
  std::pair<Var, Var> core_inverse(const ad::TapeParams& p, const Matrix& z) const override;

 private:
  template <class P>
  struct Field;
  template <class P>
  Field<P> field(const P& p, double t) const;
  template <class P>
  std::pair<typename P::value_type, typename P::value_type> inverse_impl(const P& p, const Matrix& z) const;

  Matrix mask_;
  ad::Mlp net_;
};

}  // namespace tmscm::models
