#pragma once

#include <cstddef>
#include <utility>

namespace tmscm::models {

/// Fixed-step RK4 for the augmented system dx/dt = v(x, t), dℓ/dt = tr(x, t)
/// from t0 to t1 (either direction). `field_at(t)` returns a callable
/// x ↦ (v, tr); it is queried once per distinct stage time. `check(x, ℓ, s)`
/// runs after every step.
template <class T, class FieldAt, class Check>
std::pair<T, T> rk4_with_trace(const FieldAt& field_at, T x, T ell, double t0, double t1, std::size_t steps,
                               const Check& check) {
  const double h = (t1 - t0) / static_cast<double>(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const double a = t0 + static_cast<double>(s) * h, b = t0 + static_cast<double>(s + 1) * h;
    const auto f0 = field_at(a), fm = field_at(0.5 * (a + b)), f1 = field_at(b);
    const auto [k1, l1] = f0(x);
    const auto [k2, l2] = fm(x + k1 * (0.5 * h));
    const auto [k3, l3] = fm(x + k2 * (0.5 * h));
    const auto [k4, l4] = f1(x + k3 * h);
    x = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    ell = ell + (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);
    check(x, ell, s);
  }
  return {x, ell};
}

}  // namespace tmscm::models
