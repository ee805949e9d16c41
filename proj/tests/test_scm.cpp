#include <cmath>

#include "doctest.h"
#include "scm_fixtures.hpp"
#include "tmscm/error.hpp"
#include "tmscm/parallel.hpp"
#include "tmscm/scm.hpp"

using namespace tmscm;
using testing::additive_chain;

namespace {

NodeValues values(std::initializer_list<std::pair<int, Vec>> items) {
  NodeValues out;
  for (const auto& [id, v] : items) out[NodeId{id}] = v;
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

// Jacobi iteration of v <- f(v, u) from zeros with intervened equations
// replaced; a recursive system reaches its fixed point within n sweeps.
NodeValues brute_force_solve(const Scm& scm, const Intervention& x, const NodeValues& u) {
  NodeValues v;
  for (NodeId id : scm.graph().nodes()) v[id] = Vec(scm.graph().dim(id), 0.0);
  for (std::size_t sweep = 0; sweep <= scm.graph().size(); ++sweep) {
    NodeValues next;
    for (NodeId id : scm.graph().nodes()) {
      if (x.contains(id)) {
        next[id] = x.targets.at(id);
        continue;
      }
      const Mechanism& m = scm.mechanism(id);
      next[id] = m(gather(v, m.parents), u.at(id));
    }
    v = next;
  }
  return v;
}

}  // namespace

TEST_CASE("topological order") {
  const NodeId a{1}, b{2}, c{3};
  CHECK(topological_order(CausalGraph({{c, 1, {b}}, {b, 1, {a}}, {a, 1, {}}})) == std::vector<NodeId>{a, b, c});
  CHECK(topological_order(CausalGraph({{c, 1, {a}}, {b, 1, {a}}, {a, 1, {}}})) == std::vector<NodeId>{a, b, c});
  CHECK(code_of([&] { CausalGraph({{a, 1, {c}}, {c, 1, {a}}}); }) == ErrorCode::CycleDetected);
}

TEST_CASE("graph validation rejects bad specs") {
  CHECK(code_of([] { CausalGraph({{NodeId{1}, 0, {}}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { CausalGraph({{NodeId{1}, 1, {NodeId{9}}}}); }) == ErrorCode::UnknownNode);
  CHECK(code_of([] { CausalGraph({{NodeId{1}, 1, {}}, {NodeId{2}, 1, {NodeId{1}}}}, {NodeId{2}, NodeId{1}}); }) ==
        ErrorCode::OrderMismatch);
}

TEST_CASE("graph diameter and ancestors") {
  const NodeId a{0}, b{1}, c{2}, d{3};
  CausalGraph g({{a, 1, {}}, {b, 1, {a}}, {c, 2, {b}}, {d, 1, {a}}});
  CHECK(g.diameter() == 2);
  CHECK(g.ancestors(c) == std::set<NodeId>{a, b});
  CHECK(g.total_dim() == 5);
  CHECK(g.predecessors(c) == std::vector<NodeId>{a, b});
}

TEST_CASE("solve evaluates in causal order") {
  const Scm chain = additive_chain();
  CHECK(solve(chain, values({{1, {1.0}}, {2, {2.0}}})) == values({{1, {1.0}}, {2, {3.0}}}));

  CausalGraph single({{NodeId{1}, 1, {}}});
  Mechanism twice{NodeId{1}, 1, {}, [](auto, auto u) { return Vec{2 * u[0]}; }, std::nullopt,
                  tri::Signature::increasing(1), false, "scale"};
  Scm s(single, {{NodeId{1}, twice}}, {});
  CHECK(solve(s, values({{1, {3.0}}})).at(NodeId{1})[0] == 6.0);
}

TEST_CASE("solve output is a fixed point of the structural equations") {
  const Scm scm = testing::random_scalar_scm(5, 0.5, 42);
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const NodeValues u = scm.sample_exogenous(rng);
    CHECK(fixed_point_residual(scm, u, solve(scm, u)) <= 1e-12);
  }
}

TEST_CASE("shape validation at the boundary") {
  const Scm chain = additive_chain();
  CHECK(code_of([&] { solve(chain, values({{1, {1.0}}})); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { solve(chain, values({{1, {1.0, 2.0}}, {2, {1.0}}})); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("interventions") {
  const Scm chain = additive_chain();
  const NodeValues u = values({{1, {1.0}}, {2, {2.0}}});
  Intervention x{{{NodeId{1}, {5.0}}}};
  CHECK(solve(intervene(chain, x), u) == values({{1, {5.0}}, {2, {7.0}}}));
  CHECK(potential_response(chain, x, u) == values({{1, {5.0}}, {2, {7.0}}}));
  CHECK(potential_response(chain, {}, u) == solve(chain, u));
  CHECK(solve(intervene(chain, {}), u) == solve(chain, u));

  Intervention all{{{NodeId{1}, {0.5}}, {NodeId{2}, {-1.0}}}};
  const auto a = potential_response(chain, all, u);
  const auto b = potential_response(chain, all, values({{1, {-9.0}}, {2, {4.0}}}));
  CHECK(a == b);
  CHECK(a == values({{1, {0.5}}, {2, {-1.0}}}));

  CHECK(code_of([&] { intervene(chain, Intervention{{{NodeId{7}, {1.0}}}}); }) == ErrorCode::UnknownNode);
  CHECK(code_of([&] { intervene(chain, Intervention{{{NodeId{1}, {1.0, 2.0}}}}); }) ==
        ErrorCode::PartialIntervention);
}

TEST_CASE("intervention keeps the causal order") {
  const Scm scm = testing::random_scalar_scm(6, 0.6, 3);
  const Scm sub = intervene(scm, Intervention{{{NodeId{2}, {1.0}}}});
  CHECK(sub.graph().order() == scm.graph().order());
}

TEST_CASE("potential response matches a brute-force re-solve") {
  const Scm scm = testing::random_scalar_scm(6, 0.5, 17);
  Rng rng(5);
  for (int rep = 0; rep < 30; ++rep) {
    const NodeValues u = scm.sample_exogenous(rng);
    const NodeId target{static_cast<int>(rng.index(6))};
    Intervention x{{{target, {rng.normal()}}}};
    const NodeValues fast = potential_response(scm, x, u);
    const NodeValues slow = brute_force_solve(scm, x, u);
    for (const auto& [id, v] : fast) CHECK(v[0] == doctest::Approx(slow.at(id)[0]).epsilon(1e-12));
  }
}

TEST_CASE("counterfactual joint sampling") {
  const Scm chain = additive_chain();
  SUBCASE("empty intervention reproduces observational samples") {
    const auto joint = sample_counterfactual_joint(chain, {Intervention{}}, 50, 9);
    for (std::size_t s = 0; s < joint.size(); ++s) {
      Rng rng = Rng::stream(9, s);
      CHECK(joint[s].responses[0] == solve(chain, chain.sample_exogenous(rng)));
    }
  }
  SUBCASE("additive chain effect is exactly one on every draw") {
    const auto joint = sample_counterfactual_joint(
        chain, {Intervention{{{NodeId{1}, {0.0}}}}, Intervention{{{NodeId{1}, {1.0}}}}}, 200, 4);
    for (const auto& s : joint) CHECK(s.responses[1].at(NodeId{2})[0] - s.responses[0].at(NodeId{2})[0] ==
                                      doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("point-mass exogenous gives identical samples") {
    ExogenousSpec exo;
    exo.nodes[NodeId{1}] = NodeNoise::point_mass({0.3});
    exo.nodes[NodeId{2}] = NodeNoise::point_mass({-1.2});
    Scm fixed(chain.graph(), chain.mechanisms(), exo);
    const auto joint = sample_counterfactual_joint(fixed, {Intervention{}}, 20, 1);
    for (const auto& s : joint) CHECK(s.responses[0] == joint[0].responses[0]);
  }
  SUBCASE("missing sampler is reported") {
    Scm bare(chain.graph(), chain.mechanisms(), {});
    CHECK(code_of([&] { sample_counterfactual_joint(bare, {Intervention{}}, 3, 1); }) == ErrorCode::NoSampler);
  }
  SUBCASE("results do not depend on the thread count") {
    set_thread_count(1);
    const auto one = sample_counterfactual_joint(chain, {Intervention{}}, 64, 12);
    set_thread_count(4);
    const auto four = sample_counterfactual_joint(chain, {Intervention{}}, 64, 12);
    set_thread_count(1);
    for (std::size_t s = 0; s < one.size(); ++s) CHECK(one[s].responses[0] == four[s].responses[0]);
  }
}

TEST_CASE("exogenous densities") {
  const NodeNoise n = NodeNoise::standard_normal(1);
  CHECK(n.log_pdf(Vec{0.0}) == doctest::Approx(-0.5 * std::log(2 * M_PI)));
  const NodeNoise mix = NodeNoise::mixture({0.5, 0.5}, {{-1.0}, {1.0}}, {{1.0}, {1.0}});
  const double phi1 = std::exp(-0.5) / std::sqrt(2 * M_PI);
  CHECK(mix.log_pdf(Vec{0.0}) == doctest::Approx(std::log(phi1)));
  CHECK_THROWS_AS(NodeNoise::mixture({0.7, 0.7}, {{0.0}, {1.0}}, {{1.0}, {1.0}}), Error);
}
