#include "tmscm/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace tmscm::kernels {

namespace {

// Row-level bodies shared by both variants; only the outer loop differs.

inline void linear_row(const double* xr, std::size_t in, const double* w, std::size_t out, const double* b,
                       double* yr) {
  for (std::size_t o = 0; o < out; ++o) {
    const double* wr = w + o * in;
    double s = b ? b[o] : 0.0;
    for (std::size_t k = 0; k < in; ++k) s += xr[k] * wr[k];
    yr[o] = s;
  }
}

inline void matmul_row(const double* ar, std::size_t k, const double* b, std::size_t m, double* cr) {
  for (std::size_t p = 0; p < k; ++p) {
    const double a = ar[p];
    if (a == 0.0) continue;
    const double* br = b + p * m;
    for (std::size_t j = 0; j < m; ++j) cr[j] += a * br[j];
  }
}

// Row p of aᵀ·b: Σ_i a(i,p) · b(i,:), summed over i in ascending order.
inline void matmul_tn_row(const double* a, std::size_t n, std::size_t k, std::size_t p, const double* b,
                          std::size_t m, double* cr) {
  for (std::size_t i = 0; i < n; ++i) {
    const double av = a[i * k + p];
    if (av == 0.0) continue;
    const double* br = b + i * m;
    for (std::size_t j = 0; j < m; ++j) cr[j] += av * br[j];
  }
}

inline double softmin_row(const double* xi, const double* y, std::size_t m, std::size_t d, const double* g,
                          const double* log_w, double eps, double* scratch) {
  const double inv_eps = 1.0 / eps;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) {
    const double* yj = y + j * d;
    double c = 0;
    for (std::size_t q = 0; q < d; ++q) {
      const double diff = xi[q] - yj[q];
      c += diff * diff;
    }
    const double z = log_w[j] + (g[j] - 0.5 * c) * inv_eps;
    scratch[j] = z;
    if (z > best) best = z;
  }
  // Terms below e^-50 relative to the largest cannot change the sum.
  const double cutoff = best - 50.0;
  double acc = 0;
  for (std::size_t j = 0; j < m; ++j)
    if (scratch[j] > cutoff) acc += std::exp(scratch[j] - best);
  return -eps * (best + std::log(acc));
}

}  // namespace

namespace serial {

void linear_forward(std::span<const double> x, std::size_t n, std::size_t in, std::span<const double> w,
                    std::size_t out, std::span<const double> b, std::span<double> y) {
  const double* bias = b.empty() ? nullptr : b.data();
  for (std::size_t i = 0; i < n; ++i) linear_row(x.data() + i * in, in, w.data(), out, bias, y.data() + i * out);
}

void matmul_acc(std::span<const double> a, std::size_t n, std::size_t k, std::span<const double> b, std::size_t m,
                std::span<double> c) {
  for (std::size_t i = 0; i < n; ++i) matmul_row(a.data() + i * k, k, b.data(), m, c.data() + i * m);
}

void matmul_tn_acc(std::span<const double> a, std::size_t n, std::size_t k, std::span<const double> b,
                   std::size_t m, std::span<double> c) {
  for (std::size_t p = 0; p < k; ++p) matmul_tn_row(a.data(), n, k, p, b.data(), m, c.data() + p * m);
}

void softmin(std::span<const double> x, std::size_t n, std::span<const double> y, std::size_t m, std::size_t d,
             std::span<const double> g, std::span<const double> log_w, double eps, std::span<double> out) {
  std::vector<double> scratch(m);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = softmin_row(x.data() + i * d, y.data(), m, d, g.data(), log_w.data(), eps, scratch.data());
}

}  // namespace serial

namespace parallel {

namespace {
// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kMinWork = 1 << 15;
}

void linear_forward(std::span<const double> x, std::size_t n, std::size_t in, std::span<const double> w,
                    std::size_t out, std::span<const double> b, std::span<double> y) {
  const double* bias = b.empty() ? nullptr : b.data();
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (n * in * out >= kMinWork)
  for (std::int64_t i = 0; i < rows; ++i)
    linear_row(x.data() + i * in, in, w.data(), out, bias, y.data() + i * out);
}

void matmul_acc(std::span<const double> a, std::size_t n, std::size_t k, std::span<const double> b, std::size_t m,
                std::span<double> c) {
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (n * k * m >= kMinWork)
  for (std::int64_t i = 0; i < rows; ++i) matmul_row(a.data() + i * k, k, b.data(), m, c.data() + i * m);
}

void matmul_tn_acc(std::span<const double> a, std::size_t n, std::size_t k, std::span<const double> b,
                   std::size_t m, std::span<double> c) {
  const auto rows = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(static) if (n * k * m >= kMinWork)
  for (std::int64_t p = 0; p < rows; ++p)
    matmul_tn_row(a.data(), n, k, static_cast<std::size_t>(p), b.data(), m, c.data() + p * m);
}

void softmin(std::span<const double> x, std::size_t n, std::span<const double> y, std::size_t m, std::size_t d,
             std::span<const double> g, std::span<const double> log_w, double eps, std::span<double> out) {
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel if (n * m >= kMinWork / 8)
  {
    std::vector<double> scratch(m);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < rows; ++i)
      out[i] = softmin_row(x.data() + i * d, y.data(), m, d, g.data(), log_w.data(), eps, scratch.data());
  }
}

}  // namespace parallel

}  // namespace tmscm::kernels
