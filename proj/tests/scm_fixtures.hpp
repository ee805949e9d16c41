#pragma once

#include <cmath>
#include <map>

#include "tmscm/rng.hpp"
#include "tmscm/scm.hpp"

namespace testing {

using namespace tmscm;

// V_i = Σ_k c_ik tanh(v_pa,k) + s_i u_i with s_i > 0; scalar nodes.
inline Scm random_scalar_scm(std::size_t n, double edge_prob, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CausalGraph::NodeSpec> specs;
  for (std::size_t i = 0; i < n; ++i) {
    CausalGraph::NodeSpec s{NodeId{static_cast<int>(i)}, 1, {}};
    for (std::size_t k = 0; k < i; ++k)
      if (rng.bernoulli(edge_prob)) s.parents.push_back(NodeId{static_cast<int>(k)});
    specs.push_back(s);
  }
  CausalGraph graph(specs);
  std::map<NodeId, Mechanism> mechs;
  ExogenousSpec exo;
  for (const auto& s : specs) {
    Vec coef(s.parents.size());
    for (auto& c : coef) c = rng.uniform(-1.5, 1.5);
    const double scale = rng.uniform(0.5, 2.0);
    Mechanism m;
    m.node = s.id;
    m.dim = 1;
    m.parents = s.parents;
    m.eval = [coef, scale](std::span<const double> pa, std::span<const double> u) {
      double v = scale * u[0];
      for (std::size_t k = 0; k < coef.size(); ++k) v += coef[k] * std::tanh(pa[k]);
      return Vec{v};
    };
    m.inverse = [coef, scale](std::span<const double> pa, std::span<const double> v) {
      double r = v[0];
      for (std::size_t k = 0; k < coef.size(); ++k) r -= coef[k] * std::tanh(pa[k]);
      return Vec{r / scale};
    };
    m.signature = tri::Signature::increasing(1);
    m.invertible_in_noise = true;
    m.family = "additive-tanh";
    mechs[s.id] = m;
    exo.nodes[s.id] = NodeNoise::standard_normal(1);
  }
  return Scm(graph, mechs, exo);
}

// V1 = U1, V2 = V1 + U2.
inline Scm additive_chain() {
  CausalGraph graph({{NodeId{1}, 1, {}}, {NodeId{2}, 1, {NodeId{1}}}});
  Mechanism m1{NodeId{1}, 1, {}, [](auto, auto u) { return Vec{u[0]}; },
               [](auto, auto v) { return Vec{v[0]}; }, tri::Signature::increasing(1), true, "additive"};
  Mechanism m2{NodeId{2}, 1, {NodeId{1}}, [](auto pa, auto u) { return Vec{pa[0] + u[0]}; },
               [](auto pa, auto v) { return Vec{v[0] - pa[0]}; }, tri::Signature::increasing(1), true, "additive"};
  ExogenousSpec exo;
  exo.nodes[NodeId{1}] = NodeNoise::standard_normal(1);
  exo.nodes[NodeId{2}] = NodeNoise::standard_normal(1);
  return Scm(graph, {{NodeId{1}, m1}, {NodeId{2}, m2}}, exo);
}

}  // namespace testing
