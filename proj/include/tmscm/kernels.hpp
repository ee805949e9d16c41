#pragma once

#include <cstddef>
#include <span>

// Dense inner loops shared by the autodiff engine and the Sinkhorn solver.
//
// Every kernel exists twice: `serial` is the reference, `parallel` splits
// the outer loop across OpenMP threads. Each output element is reduced in
// the same order by both, so the two agree bit for bit and results do not
// depend on the thread count. All matrices are row-major.
namespace tmscm::kernels {

namespace serial {

/// y(n×out) = x(n×in) · w(out×in)ᵀ + b(out); b may be empty.
void linear_forward(std::span<const double> x, std::size_t n, std::size_t in, std::span<const double> w,
                    std::size_t out, std::span<const double> b, std::span<double> y);

/// c(n×m) += a(n×k) · b(k×m).
void matmul_acc(std::span<const double> a, std::size_t n, std::size_t k, std::span<const double> b, std::size_t m,
                std::span<double> c);

/// c(k×m) += a(n×k)ᵀ · b(n×m).
void matmul_tn_acc(std::span<const double> a, std::size_t n, std::size_t k, std::span<const double> b,
                   std::size_t m, std::span<double> c);

/// out_i = -eps · log Σ_j exp(log_w_j + (g_j - ½‖x_i - y_j‖²) / eps).
/// x is n×d, y is m×d.
void softmin(std::span<const double> x, std::size_t n, std::span<const double> y, std::size_t m, std::size_t d,
             std::span<const double> g, std::span<const double> log_w, double eps, std::span<double> out);

}  // namespace serial

namespace parallel {

void linear_forward(std::span<const double> x, std::size_t n, std::size_t in, std::span<const double> w,
                    std::size_t out, std::span<const double> b, std::span<double> y);
void matmul_acc(std::span<const double> a, std::size_t n, std::size_t k, std::span<const double> b, std::size_t m,
                std::span<double> c);
void matmul_tn_acc(std::span<const double> a, std::size_t n, std::size_t k, std::span<const double> b,
                   std::size_t m, std::span<double> c);
void softmin(std::span<const double> x, std::size_t n, std::span<const double> y, std::size_t m, std::size_t d,
             std::span<const double> g, std::span<const double> log_w, double eps, std::span<double> out);

}  // namespace parallel

}  // namespace tmscm::kernels
