#include <cmath>

#include "doctest.h"
#include "scm_fixtures.hpp"
#include "test_support.hpp"
#include "tmscm/error.hpp"
#include "tmscm/inference.hpp"
#include "tmscm/models/model.hpp"
#include "tmscm/synthesis.hpp"

using namespace tmscm;
using namespace tmscm::inference;

namespace {

// Rotation of a single 2-d node: bijective but not triangular.
class Rotation final : public FlatSolutionMap {
 public:
  Rotation() : vec_(CausalGraph({{NodeId{1}, 2, {}}})) {}
  const Vectorization& vectorization() const override { return vec_; }
  Vec forward(const Vec& u) const override { return {c_ * u[0] - s_ * u[1], s_ * u[0] + c_ * u[1]}; }
  Vec inverse(const Vec& v) const override { return {c_ * v[0] + s_ * v[1], -s_ * v[0] + c_ * v[1]}; }

 private:
  Vectorization vec_;
  double c_ = std::cos(0.7), s_ = std::sin(0.7);
};

Intervention random_intervention(const CausalGraph& g, Rng& rng) {
  Intervention x;
  const std::size_t k = 1 + rng.index(std::min<std::size_t>(3, g.size()));
  for (std::size_t r = 0; r < k; ++r) {
    const NodeId id = g.nodes()[rng.index(g.size())];
    x.targets[id] = rng.normal_vector(g.dim(id));
  }
  return x;
}

}  // namespace

TEST_CASE("empty intervention returns the solution") {
  const ScmSolutionMap map(testing::additive_chain());
  const Vec u{0.4, -1.2};
  CHECK(testing::max_abs_diff(pseudo_potential_response(map, u, Intervention{}), map.forward(u)) < 1e-15);
}

TEST_CASE("additive chain by hand") {
  const ScmSolutionMap map(testing::additive_chain());
  Intervention x;
  x.targets[NodeId{1}] = {5.0};
  const Vec v = pseudo_potential_response(map, Vec{1.0, 2.0}, x);
  CHECK(v[0] == 5.0);
  CHECK(v[1] == doctest::Approx(7.0));
  const Vec cf = counterfactual_outcome(map, Vec{1.0, 3.0}, x);
  CHECK(cf[0] == 5.0);
  CHECK(cf[1] == doctest::Approx(7.0));
  Intervention y;
  y.targets[NodeId{2}] = {-1.0};
  const Vec w = counterfactual_outcome(map, Vec{1.0, 3.0}, y);
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(w[1] == -1.0);
}

TEST_CASE("pseudo potential response matches the recursive potential response") {
  Rng rng(2024);
  double worst = 0;
  for (int s = 0; s < 100; ++s) {
    synth::GeneratorConfig c;
    c.nodes = 2 + rng.index(7);
    c.edge_prob = rng.uniform(0.2, 0.8);
    c.dim_max = 3;
    c.mechanism = s % 2 ? synth::MechanismKind::TrilAffine : synth::MechanismKind::DiagAffine;
    c.seed = 1000 + s;
    const Scm scm = synth::gen_ground_truth(c);
    const ScmSolutionMap map(scm);
    const Vectorization& vec = map.vectorization();
    Matrix u(10, vec.total_dim());
    std::vector<Intervention> xs;
    for (std::size_t i = 0; i < 10; ++i) {
      const Vec row = vec.flatten(scm.sample_exogenous(rng));
      std::copy(row.begin(), row.end(), u.row_span(i).begin());
      xs.push_back(random_intervention(scm.graph(), rng));
    }
    const Matrix ppr = pseudo_potential_response(map, u, xs);
    for (std::size_t i = 0; i < 10; ++i) {
      const Vec row(u.row_span(i).begin(), u.row_span(i).end());
      const Vec truth = vec.flatten(potential_response(scm, xs[i], vec.unflatten(row)));
      const Vec got(ppr.row_span(i).begin(), ppr.row_span(i).end());
      worst = std::max(worst, testing::max_rel_error(got, truth, 1.0));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("mechanism models: flat answer equals the mechanism-level answer") {
  using namespace tmscm::models;
  const CausalGraph g({{NodeId{1}, 2, {}}, {NodeId{2}, 1, {NodeId{1}}}, {NodeId{3}, 2, {NodeId{1}, NodeId{2}}}});
  for (Family f : {Family::Dnme, Family::Tnme}) {
    ModelConfig cfg;
    cfg.family = f;
    cfg.hidden = {8};
    auto m = TmScmModel::create(g, cfg);
    m->initialize(1);
    Vec theta = m->parameters();
    Rng rng(3);
    for (double& t : theta) t += 0.3 * rng.normal();
    m->set_parameters(theta);
    const auto scm = m->as_scm();
    REQUIRE(scm.has_value());
    const Vectorization& vec = m->vectorization();
    for (int r = 0; r < 20; ++r) {
      const Vec u = rng.normal_vector(5);
      const Intervention x = random_intervention(g, rng);
      const Vec truth = vec.flatten(potential_response(*scm, x, vec.unflatten(u)));
      CHECK(testing::max_rel_error(pseudo_potential_response(*m, u, x), truth, 1.0) < 1e-9);
    }
  }
}

TEST_CASE("TVSM answers keep the intervened values and non-descendants") {
  using namespace tmscm::models;
  const CausalGraph g({{NodeId{1}, 1, {}}, {NodeId{2}, 2, {NodeId{1}}}, {NodeId{3}, 1, {}}});
  ModelConfig cfg;
  cfg.family = Family::Tvsm;
  cfg.hidden = {8};
  auto m = TmScmModel::create(g, cfg);
  m->initialize(4);
  Vec theta = m->parameters();
  Rng rng(8);
  for (double& t : theta) t += 0.3 * rng.normal();
  m->set_parameters(theta);
  const Vectorization& vec = m->vectorization();
  for (int r = 0; r < 10; ++r) {
    const Vec v = m->forward(rng.normal_vector(4));
    Intervention x;
    x.targets[NodeId{2}] = rng.normal_vector(2);
    const NodeValues cf = vec.unflatten(counterfactual_outcome(*m, v, x));
    const NodeValues f = vec.unflatten(v);
    CHECK(cf.at(NodeId{2}) == x.targets[NodeId{2}]);
    CHECK(testing::max_abs_diff(cf.at(NodeId{1}), f.at(NodeId{1})) < 1e-7);
    CHECK(testing::max_abs_diff(cf.at(NodeId{3}), f.at(NodeId{3})) < 1e-7);
  }
}

TEST_CASE("abduction round trips") {
  synth::GeneratorConfig c;
  c.nodes = 6;
  c.seed = 17;
  const ScmSolutionMap map(synth::gen_ground_truth(c));
  const std::size_t d = map.vectorization().total_dim();
  Rng rng(1);
  Matrix v(1000, d);
  for (std::size_t i = 0; i < v.rows(); ++i) {
    const Vec row = map.forward(rng.normal_vector(d));
    std::copy(row.begin(), row.end(), v.row_span(i).begin());
  }
  const Matrix back = map.forward_batch(abduct(map, v));
  CHECK(testing::max_abs_diff(back.storage(), v.storage()) < 1e-8);
  const Matrix recon = counterfactual_outcome(map, v, std::vector<Intervention>(v.rows()));
  CHECK(testing::max_abs_diff(recon.storage(), v.storage()) < 1e-8);
}

TEST_CASE("invalid interventions") {
  const ScmSolutionMap map(testing::additive_chain());
  Intervention partial;
  partial.targets[NodeId{1}] = {1.0, 2.0};
  try {
    pseudo_potential_response(map, Vec{0.0, 0.0}, partial);
    FAIL("expected PartialIntervention");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PartialIntervention);
  }
  Intervention unknown;
  unknown.targets[NodeId{9}] = {1.0};
  try {
    pseudo_potential_response(map, Vec{0.0, 0.0}, unknown);
    FAIL("expected UnknownNode");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownNode);
  }
  CHECK_THROWS_AS(pseudo_potential_response(map, Matrix(2, 2), std::vector<Intervention>(1)), Error);
}

TEST_CASE("a non-triangular map is caught") {
  const Rotation map;
  Intervention x;
  x.targets[NodeId{1}] = {1.0, 2.0};
  try {
    pseudo_potential_response(map, Vec{0.3, -0.4}, x);
    FAIL("expected PrefixViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PrefixViolation);
  }
}
