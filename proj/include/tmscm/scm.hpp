#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmscm/graph.hpp"
#include "tmscm/rng.hpp"
#include "tmscm/triangular.hpp"

namespace tmscm {

/// Per-node real vectors keyed by node id (endogenous or exogenous values).
using NodeValues = std::map<NodeId, Vec>;

/// Parent values are passed concatenated in ascending parent-id order.
using MechanismFn = std::function<Vec(std::span<const double> parents, std::span<const double> arg)>;

struct Mechanism {
  NodeId node;
  std::size_t dim = 1;
  std::vector<NodeId> parents;
  MechanismFn eval;                    // (v_pa, u_i) -> v_i
  std::optional<MechanismFn> inverse;  // (v_pa, v_i) -> u_i
  tri::Signature signature;
  bool invertible_in_noise = false;
  std::string family = "custom";

  Vec operator()(std::span<const double> parents_flat, std::span<const double> u) const { return eval(parents_flat, u); }

  /// Noise preimage of v_i for fixed parents; analytic when available,
  /// otherwise coordinate-wise root finding on the triangular view.
  Vec invert(std::span<const double> parents_flat, std::span<const double> v) const;

  /// f(v_pa, .) as a triangular map; requires a signature with no zeros.
  tri::TriangularMap noise_map(std::span<const double> parents_flat) const;
};

Mechanism constant_mechanism(NodeId node, const Vec& value);

/// Distribution of one node's exogenous vector.
struct NodeNoise {
  enum class Kind { StandardNormal, PointMass, DiagonalGaussianMixture, Custom };

  Kind kind = Kind::StandardNormal;
  std::size_t dim = 1;
  Vec point;                       // PointMass
  Vec weights;                     // mixture weights, sum to 1
  std::vector<Vec> means, stddevs;  // per component
  std::function<Vec(Rng&)> sampler;                    // Custom
  std::function<double(std::span<const double>)> density;  // Custom, log-density

  static NodeNoise standard_normal(std::size_t dim) {
    NodeNoise n;
    n.dim = dim;
    return n;
  }
  static NodeNoise custom(std::size_t dim, std::function<Vec(Rng&)> sampler,
                          std::function<double(std::span<const double>)> density);
  static NodeNoise point_mass(Vec value);
  static NodeNoise mixture(Vec weights, std::vector<Vec> means, std::vector<Vec> stddevs);

  Vec sample(Rng& rng) const;
  double log_pdf(std::span<const double> u) const;
};

/// Markovian when described by per-node distributions only. A joint sampler
/// (and optionally a parent-conditional sampler) describes a non-product P_U.
struct ExogenousSpec {
  std::map<NodeId, NodeNoise> nodes;
  std::function<NodeValues(Rng&)> joint_sampler;
  std::function<Vec(NodeId, std::span<const double> parents, Rng&)> conditional_sampler;

  bool markovian() const { return !joint_sampler && !conditional_sampler; }
};

struct Intervention {
  std::map<NodeId, Vec> targets;

  bool empty() const { return targets.empty(); }
  bool contains(NodeId id) const { return targets.count(id) != 0; }
};

class Scm {
 public:
  Scm(CausalGraph graph, std::map<NodeId, Mechanism> mechanisms, ExogenousSpec exogenous);

  const CausalGraph& graph() const { return graph_; }
  const Mechanism& mechanism(NodeId id) const;
  const std::map<NodeId, Mechanism>& mechanisms() const { return mechanisms_; }
  const ExogenousSpec& exogenous() const { return exogenous_; }
  bool markovian() const { return exogenous_.markovian(); }
  bool all_invertible() const;

  NodeValues sample_exogenous(Rng& rng) const;

 private:
  CausalGraph graph_;
  std::map<NodeId, Mechanism> mechanisms_;
  ExogenousSpec exogenous_;
};

Vec gather(const NodeValues& values, const std::vector<NodeId>& ids);
void check_shapes(const CausalGraph& graph, const NodeValues& values, const char* what);
void validate(const CausalGraph& graph, const Intervention& x);

/// Γ(u): evaluates mechanisms in causal order.
NodeValues solve(const Scm& scm, const NodeValues& u);
/// Submodel M_[x]: intervened mechanisms replaced by constants.
Scm intervene(const Scm& scm, const Intervention& x);
/// Γ_[x](u).
NodeValues potential_response(const Scm& scm, const Intervention& x, const NodeValues& u);
/// Largest coordinate-wise |f_i(v_pa, u_i) - v_i| over all nodes.
double fixed_point_residual(const Scm& scm, const NodeValues& u, const NodeValues& v);

/// One joint draw of (V_[x_1], ..., V_[x_k]) on a shared exogenous value.
struct CounterfactualSample {
  NodeValues u;
  std::vector<NodeValues> responses;
};

/// n joint counterfactual samples; sample s uses the RNG stream (seed, s).
std::vector<CounterfactualSample> sample_counterfactual_joint(const Scm& scm, const std::vector<Intervention>& xs,
                                                              std::size_t n, std::uint64_t seed);

}  // namespace tmscm
