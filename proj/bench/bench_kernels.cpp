#include <benchmark/benchmark.h>

#include <vector>

#include "tmscm/kernels.hpp"
#include "tmscm/metrics.hpp"
#include "tmscm/rng.hpp"

using namespace tmscm;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return rng.normal_vector(n);
}

template <bool Parallel>
void BM_LinearForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t in = 64, out = 64;
  const auto x = normals(n * in, 1), w = normals(out * in, 2), b = normals(out, 3);
  std::vector<double> y(n * out);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::parallel::linear_forward(x, n, in, w, out, b, y);
    else
      kernels::serial::linear_forward(x, n, in, w, out, b, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * n * in * out);
}

template <bool Parallel>
void BM_MatmulTn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 64, m = 64;
  const auto a = normals(n * k, 4), b = normals(n * m, 5);
  std::vector<double> c(k * m);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0);
    if constexpr (Parallel)
      kernels::parallel::matmul_tn_acc(a, n, k, b, m, c);
    else
      kernels::serial::matmul_tn_acc(a, n, k, b, m, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * n * k * m);
}

template <bool Parallel>
void BM_Softmin(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 4;
  const auto x = normals(n * d, 6), y = normals(n * d, 7);
  const std::vector<double> g(n, 0.0), log_w(n, -std::log(static_cast<double>(n)));
  std::vector<double> out(n);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::parallel::softmin(x, n, y, n, d, g, log_w, 0.0025, out);
    else
      kernels::serial::softmin(x, n, y, n, d, g, log_w, 0.0025, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}

template <bool Parallel>
void BM_SinkhornDivergence(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ad::Matrix x(n, 3), y(n, 3);
  Rng rng(8);
  for (double& v : x.data()) v = rng.normal();
  for (double& v : y.data()) v = 0.5 + rng.normal();
  metrics::SinkhornOptions opts;
  opts.parallel = Parallel;
  for (auto _ : state) benchmark::DoNotOptimize(metrics::sinkhorn_divergence(x, y, opts));
}

}  // namespace

BENCHMARK(BM_LinearForward<false>)->Name("linear_forward/serial")->Arg(256)->Arg(4096);
BENCHMARK(BM_LinearForward<true>)->Name("linear_forward/parallel")->Arg(256)->Arg(4096);
BENCHMARK(BM_MatmulTn<false>)->Name("matmul_tn_acc/serial")->Arg(256)->Arg(4096);
BENCHMARK(BM_MatmulTn<true>)->Name("matmul_tn_acc/parallel")->Arg(256)->Arg(4096);
BENCHMARK(BM_Softmin<false>)->Name("softmin/serial")->Arg(512)->Arg(2048);
BENCHMARK(BM_Softmin<true>)->Name("softmin/parallel")->Arg(512)->Arg(2048);
BENCHMARK(BM_SinkhornDivergence<false>)->Name("sinkhorn/serial")->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SinkhornDivergence<true>)->Name("sinkhorn/parallel")->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
