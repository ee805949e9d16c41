#include "doctest.h"
#include "tmscm/kernels.hpp"
#include "tmscm/parallel.hpp"
#include "tmscm/rng.hpp"

using namespace tmscm;

namespace {

Vec random(std::size_t n, Rng& rng) { return rng.normal_vector(n); }

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference bit for bit") {
  Rng rng(1);
  const std::size_t n = 300, in = 70, out = 50;
  const Vec x = random(n * in, rng), w = random(out * in, rng), b = random(out, rng);
  for (int threads : {1, 2, 4}) {
    set_thread_count(threads);
    Vec ys(n * out), yp(n * out);
    kernels::serial::linear_forward(x, n, in, w, out, b, ys);
    kernels::parallel::linear_forward(x, n, in, w, out, b, yp);
    CHECK(ys == yp);

    const Vec g = random(n * out, rng);
    Vec cs(n * in, 0.5), cp(n * in, 0.5);
    kernels::serial::matmul_acc(g, n, out, w, in, cs);
    kernels::parallel::matmul_acc(g, n, out, w, in, cp);
    CHECK(cs == cp);

    Vec ts(out * in), tp(out * in);
    kernels::serial::matmul_tn_acc(g, n, out, x, in, ts);
    kernels::parallel::matmul_tn_acc(g, n, out, x, in, tp);
    CHECK(ts == tp);

    const std::size_t m = 400, d = 3;
    const Vec px = random(n * d, rng), py = random(m * d, rng), pot = random(m, rng);
    const Vec logw(m, -std::log(static_cast<double>(m)));
    Vec ss(n), sp(n);
    kernels::serial::softmin(px, n, py, m, d, pot, logw, 0.01, ss);
    kernels::parallel::softmin(px, n, py, m, d, pot, logw, 0.01, sp);
    CHECK(ss == sp);
  }
  set_thread_count(1);
}

TEST_CASE("linear forward by hand") {
  const Vec x{1, 2}, w{1, 0, 0, 1, 1, 1}, b{0.5, 0, -1};
  Vec y(3);
  kernels::serial::linear_forward(x, 1, 2, w, 3, b, y);
  CHECK(y == Vec{1.5, 2, 2});
}

TEST_CASE("softmin with one target is the shifted cost") {
  const Vec x{0, 0, 3, 4}, y{0, 0}, g{1.0}, logw{0.0};
  Vec out(2);
  kernels::serial::softmin(x, 2, y, 1, 2, g, logw, 0.1, out);
  CHECK(out[0] == doctest::Approx(-1.0));
  CHECK(out[1] == doctest::Approx(12.5 - 1.0));
}
