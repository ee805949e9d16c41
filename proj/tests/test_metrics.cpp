#include <algorithm>
#include <chrono>
#include <cmath>

#include "doctest.h"
#include "tmscm/error.hpp"
#include "tmscm/metrics.hpp"
#include "tmscm/rng.hpp"

using namespace tmscm;
using namespace tmscm::metrics;

namespace {

Matrix gaussian(std::size_t n, std::size_t d, double shift, double scale, Rng& rng) {
  Matrix m(n, d);
  for (auto& v : m.data()) v = shift + scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("identical inputs have zero divergence") {
  Rng rng(1);
  const Matrix x = gaussian(200, 2, 0, 1, rng);
  CHECK(sinkhorn_divergence(x, x) < 1e-9);
}

TEST_CASE("point masses at 0 and 1") {
  CHECK(sinkhorn_divergence(Matrix(1, 1, 0.0), Matrix(1, 1, 1.0)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("symmetric and nonnegative") {
  Rng rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const Matrix x = gaussian(60 + rep, 2, 0, 1, rng);
    const Matrix y = gaussian(70, 2, 0.3, 1.2, rng);
    const double a = sinkhorn_divergence(x, y), b = sinkhorn_divergence(y, x);
    CHECK(a >= 0);
    // The 500-iteration cap stops short of full convergence at blur 0.05.
    CHECK(a == doctest::Approx(b).epsilon(1e-2));
  }
}

TEST_CASE("1D divergence approaches the sorted-pairing Wasserstein cost") {
  Rng rng(3);
  const std::size_t n = 2048;
  const Matrix x = gaussian(n, 1, 0, 1, rng);
  const Matrix y = gaussian(n, 1, 1, 1, rng);
  const double exact = w2_sorted_1d(x.storage(), y.storage());
  const auto r = sinkhorn(x, y);
  CHECK(std::abs(r.divergence - exact) / exact < 0.1);
}

TEST_CASE("serial and parallel kernels give identical divergences") {
  Rng rng(4);
  const Matrix x = gaussian(300, 3, 0, 1, rng), y = gaussian(250, 3, 0.5, 1, rng);
  SinkhornOptions serial;
  serial.parallel = false;
  CHECK(sinkhorn_divergence(x, y, serial) == sinkhorn_divergence(x, y));
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(sinkhorn_divergence(Matrix(0, 1), Matrix(2, 1)), Error);
  CHECK_THROWS_AS(sinkhorn_divergence(Matrix(2, 1), Matrix(2, 2)), Error);
}

TEST_CASE("rmse") {
  Matrix t(3, 2);
  Rng rng(5);
  for (auto& v : t.data()) v = rng.normal();
  CHECK(ctf_rmse(t, t) == 0.0);
  CHECK(ctf_rmse(t + 1.0, t) == doctest::Approx(1.0));
  CHECK(ctf_rmse(Matrix(1, 2, 0.0), Matrix(1, 2, std::vector<double>{3, 4})) == doctest::Approx(std::sqrt(12.5)));
  Matrix p = t + 0.3;
  CHECK(ctf_rmse(p * -2.5, t * -2.5) == doctest::Approx(2.5 * ctf_rmse(p, t)));
  CHECK_THROWS_AS(ctf_rmse(Matrix(1, 2), Matrix(2, 1)), Error);
}

TEST_CASE("report round trips through json") {
  MetricsReport r;
  r.obs_wd = 0.12;
  r.ctf_rmse = 0.5;
  r.ctf_wd = 0.03;
  r.n_ctf = 10;
  r.config["family"] = "dnme";
  const auto back = report_from_json(to_json(r));
  CHECK(back.obs_wd == r.obs_wd);
  CHECK(back.config == r.config);
  CHECK_THROWS_AS(report_from_json("{\"obs_wd\": -1}"), Error);
}
