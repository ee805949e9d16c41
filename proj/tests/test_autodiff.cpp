#include <cmath>

#include "doctest.h"
#include "test_support.hpp"
#include "tmscm/ad/mlp.hpp"
#include "tmscm/error.hpp"

using namespace tmscm;
using namespace tmscm::ad;

namespace {

// Checks d/dθ of f against central differences, where θ feeds a single parameter leaf.
void check_unary(const std::function<Var(Var)>& op, Vec theta, std::size_t rows, std::size_t cols) {
  auto objective = [&](TapeParams& p) {
    Var y = op(p.get(0, rows, cols));
    Matrix weights(y.rows(), y.cols());
    for (std::size_t k = 0; k < weights.size(); ++k) weights[k] = 0.7 - 0.3 * static_cast<double>(k);
    return sum(y * p.lift(weights));
  };
  const auto analytic = grad(objective, theta).gradient;
  const auto numeric = testing::central_difference([&](const Vec& t) { return grad(objective, t).value; }, theta);
  CHECK(testing::max_rel_error(analytic, numeric, 1e-6) < 1e-6);
}

}  // namespace

TEST_CASE("square at 3 has gradient 6") {
  auto r = grad([](TapeParams& p) { return sum(square(p.get(0, 1, 1))); }, {3.0});
  CHECK(r.value == doctest::Approx(9.0));
  CHECK(r.gradient[0] == doctest::Approx(6.0));
}

TEST_CASE("product gradient swaps operands") {
  auto r = grad([](TapeParams& p) { return sum(p.get(0, 1, 1) * p.get(1, 1, 1)); }, {2.0, 5.0});
  CHECK(r.gradient[0] == doctest::Approx(5.0));
  CHECK(r.gradient[1] == doctest::Approx(2.0));
}

TEST_CASE("non-scalar output is rejected") {
  Tape tape;
  Var x = tape.variable(Matrix(2, 1, 1.0));
  try {
    tape.backward(x);
    FAIL("expected NotScalar");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotScalar);
  }
}

TEST_CASE("disconnected parameters get zero gradient") {
  auto r = grad([](TapeParams& p) {
    p.get(1, 1, 1);
    return sum(p.get(0, 1, 1) * 2.0);
  }, {1.0, 4.0});
  CHECK(r.gradient[0] == doctest::Approx(2.0));
  CHECK(r.gradient[1] == 0.0);
}

TEST_CASE("elementwise ops pass the gradient check") {
  const Vec theta{0.3, -0.8, 1.2, 0.5, -0.1, 0.9};
  check_unary([](Var x) { return tanh(x); }, theta, 2, 3);
  check_unary([](Var x) { return sigmoid(x); }, theta, 2, 3);
  check_unary([](Var x) { return exp(x); }, theta, 2, 3);
  check_unary([](Var x) { return softplus(x); }, theta, 2, 3);
  check_unary([](Var x) { return square(x); }, theta, 2, 3);
  check_unary([](Var x) { return logsumexp_rows(x); }, theta, 2, 3);
  check_unary([](Var x) { return row_sum(x); }, theta, 2, 3);
  check_unary([](Var x) { return x * x - x / (x * x + 1.0); }, theta, 2, 3);
  check_unary([](Var x) { return cols(x, 1, 2) * col(x, 0); }, theta, 2, 3);
  check_unary([](Var x) { return hcat({col(x, 2), exp(col(x, 0))}); }, theta, 2, 3);
  check_unary([](Var x) { return mean(x) * x; }, theta, 2, 3);
  check_unary([](Var x) { return diagonal(x * tanh(x)); }, {0.3, -0.8, 1.2, 0.5}, 2, 2);
  check_unary([](Var x) { return log(square(x) + 0.5); }, theta, 2, 3);
  check_unary([](Var x) { return reshape(x, 3, 2) * reshape(tanh(x), 3, 2); }, theta, 2, 3);
}

TEST_CASE("broadcast operands accumulate over the broadcast axis") {
  const Vec theta{0.2, -0.4, 0.6, 1.1, 0.3, -0.7, 0.5, 0.25};
  auto objective = [](TapeParams& p) {
    Var m = p.get(0, 2, 3);
    Var row = p.get(6, 1, 1);
    Var c = p.get(7, 1, 1);
    return sum(tanh(m * row + c) / (row + 2.0));
  };
  const auto analytic = grad(objective, theta).gradient;
  const auto numeric = testing::central_difference([&](const Vec& t) { return grad(objective, t).value; }, theta);
  CHECK(testing::max_rel_error(analytic, numeric, 1e-6) < 1e-6);
}

TEST_CASE("random two-hidden-layer MLP loss matches finite differences") {
  Mlp mlp({3, 8, 8, 2}, 0);
  Vec theta(mlp.parameter_count());
  Rng rng(11);
  mlp.initialize(theta, rng, false);
  Matrix x(5, 3);
  for (auto& v : x.data()) v = rng.normal();
  auto objective = [&](TapeParams& p) {
    Var y = mlp.forward(p, p.lift(x));
    return mean(square(y - 0.3));
  };
  const auto analytic = grad(objective, theta).gradient;
  const auto numeric = testing::central_difference([&](const Vec& t) { return grad(objective, t).value; }, theta);
  CHECK(testing::max_rel_error(analytic, numeric, 1e-7) < 1e-4);
}

TEST_CASE("plain and taped MLP evaluation agree") {
  Mlp mlp({2, 5, 3}, 4);
  Vec theta(mlp.end(), 0.0);
  Rng rng(3);
  mlp.initialize(theta, rng, false);
  Matrix x(4, 2);
  for (auto& v : x.data()) v = rng.normal();
  const Matrix plain = mlp.forward(PlainParams(theta), x);
  Tape tape;
  TapeParams tp(tape, theta);
  const Matrix taped = mlp.forward(tp, tp.lift(x)).value();
  CHECK(plain.storage() == taped.storage());
  CHECK(mlp.parameter_count() == (2 + 1) * 5 + (5 + 1) * 3);
}

TEST_CASE("zeroed last layer gives a constant zero output") {
  Mlp mlp({3, 6, 2}, 0);
  Vec theta(mlp.parameter_count());
  Rng rng(5);
  mlp.initialize(theta, rng, true);
  Matrix x(3, 3, 1.5);
  const Matrix y = mlp.forward(PlainParams(theta), x);
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("masked weights block masked inputs") {
  Mlp mlp({2, 4, 1}, 0);
  Vec theta(mlp.parameter_count());
  Rng rng(2);
  mlp.initialize(theta, rng, false);
  Matrix m0(4, 2, 1.0);
  for (std::size_t r = 0; r < 4; ++r) m0(r, 1) = 0.0;
  mlp.set_masks({m0, Matrix(1, 4, 1.0)});
  Matrix a(1, 2), b(1, 2);
  a(0, 0) = b(0, 0) = 0.4;
  a(0, 1) = -3.0;
  b(0, 1) = 7.0;
  CHECK(mlp.forward(PlainParams(theta), a)[0] == mlp.forward(PlainParams(theta), b)[0]);
}

TEST_CASE("adam first step moves by the learning rate") {
  AdamState s(1, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  Vec p{1.0};
  adam_step(s, p, {1.0});
  // m̂ = 1, v̂ = 1, so the step is lr / (1 + eps).
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("adam leaves parameters unchanged on zero gradient") {
  AdamState s(3, AdamConfig{});
  Vec p{1.0, -2.0, 0.5};
  const Vec before = p;
  adam_step(s, p, {0.0, 0.0, 0.0});
  CHECK(p == before);
}

TEST_CASE("adam rejects mismatched shapes") {
  AdamState s(2, AdamConfig{});
  Vec p{1.0, 2.0};
  CHECK_THROWS_AS(adam_step(s, p, {1.0}), Error);
}

TEST_CASE("identical training runs are bitwise identical") {
  auto run = [] {
    Mlp mlp({2, 6, 1}, 0);
    Vec theta(mlp.parameter_count());
    Rng rng(9);
    mlp.initialize(theta, rng, false);
    AdamState s(theta.size(), AdamConfig{});
    Matrix x(8, 2);
    for (auto& v : x.data()) v = rng.normal();
    for (int it = 0; it < 20; ++it) {
      auto g = grad([&](TapeParams& p) { return mean(square(mlp.forward(p, p.lift(x)) - 1.0)); }, theta);
      adam_step(s, theta, g.gradient);
    }
    return theta;
  };
  CHECK(run() == run());
}

TEST_CASE("chain rule through composed maps matches the Jacobian product") {
  // f(g(x)) with g(x) = tanh(W x), f(y) = Σ exp(y); compare to J_fᵀ·J_g by hand.
  const Vec theta{0.4, -0.2, 0.1, 0.7, 0.3, -0.5};
  Matrix w(2, 2, std::vector<double>{0.5, -1.0, 0.8, 0.2});
  auto objective = [&](TapeParams& p) {
    Var x = p.get(0, 1, 2);
    return sum(exp(tanh(linear(x, p.lift(w)))));
  };
  const auto g = grad(objective, theta).gradient;
  const double x0 = theta[0], x1 = theta[1];
  double expect0 = 0, expect1 = 0;
  for (int i = 0; i < 2; ++i) {
    const double y = std::tanh(w(i, 0) * x0 + w(i, 1) * x1);
    const double dy = std::exp(y) * (1 - y * y);
    expect0 += dy * w(i, 0);
    expect1 += dy * w(i, 1);
  }
  CHECK(g[0] == doctest::Approx(expect0).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(expect1).epsilon(1e-12));
}
