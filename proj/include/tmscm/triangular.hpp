#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tmscm/rng.hpp"

namespace tmscm::tri {

/// Per-coordinate direction of strict monotonicity, entries in {-1, 0, +1}.
class Signature {
 public:
  Signature() = default;
  explicit Signature(std::vector<int> entries);
  static Signature increasing(std::size_t d) { return Signature(std::vector<int>(d, 1)); }

  std::size_t size() const { return entries_.size(); }
  int operator[](std::size_t j) const { return entries_[j]; }
  const std::vector<int>& entries() const { return entries_; }

  bool is_tm() const;   // no zero entries
  bool is_tmi() const;  // all +1
  Signature slice(std::size_t first, std::size_t last) const;  // inclusive, 0-based

  friend bool operator==(const Signature&, const Signature&) = default;

 private:
  std::vector<int> entries_;
};

/// Component-wise product; the signature of a composition.
Signature operator*(const Signature& a, const Signature& b);
Signature concat(const Signature& a, const Signature& b);

// x holds coordinates 0..j; a component must not read past x[j].
using ComponentFn = std::function<double(std::size_t j, std::span<const double> x)>;
// Solves T_j(prefix, s) = z for s, where prefix holds coordinates 0..j-1.
using ComponentInverseFn = std::function<double(std::size_t j, std::span<const double> prefix, double z)>;
using FlatMap = std::function<Vec(const Vec&)>;

/// A map R^d -> R^d whose j-th output depends only on inputs 0..j.
class TriangularMap {
 public:
  TriangularMap(std::size_t dim, Signature signature, ComponentFn component,
                std::optional<ComponentInverseFn> inverse = std::nullopt, FlatMap full = {});

  static TriangularMap identity(std::size_t d);
  /// x -> b + L x with L lower triangular (row-major, d*d); upper entries ignored.
  static TriangularMap lower_affine(std::vector<double> L, Vec b);

  std::size_t dim() const { return dim_; }
  const Signature& signature() const { return signature_; }

  double component(std::size_t j, std::span<const double> x) const { return component_(j, x); }
  bool has_component_inverse() const { return inverse_.has_value(); }
  /// Uses the analytic inverse when present, else bracketed root finding.
  double invert_component(std::size_t j, std::span<const double> prefix, double z) const;

  Vec operator()(const Vec& x) const;
  FlatMap as_flat_map() const;

 private:
  std::size_t dim_;
  Signature signature_;
  ComponentFn component_;
  std::optional<ComponentInverseFn> inverse_;
  FlatMap full_;
};

struct RootOptions {
  double initial_step = 1.0;
  double growth = 2.0;
  int max_doublings = 64;
  double bisection_width = 1e-12;
  int newton_steps = 8;
};

/// Solves g(s) = target for strictly monotone g with the given direction
/// (+1 increasing, -1 decreasing), starting the bracket search at `start`.
double solve_monotone(const std::function<double(double)>& g, int direction, double target, double start,
                      const RootOptions& opts = {});

Vec invert(const TriangularMap& map, const Vec& z);
/// outer ∘ inner.
TriangularMap compose(const TriangularMap& outer, const TriangularMap& inner);
/// The inverse as a TriangularMap (evaluated by coordinate-wise inversion).
TriangularMap inverse_view(const TriangularMap& map);
/// Restriction to coordinates first..last (inclusive, 0-based) with the
/// coordinates before `first` frozen at `prefix`.
TriangularMap slice(const TriangularMap& map, std::size_t first, std::size_t last, std::span<const double> prefix);

struct ProbeOptions {
  std::size_t points = 100;
  double step = 1e-5;
  double spread = 1.5;        // probe points are spread * N(0,1) quantiles of a Halton sequence
  double tolerance = 1e-9;    // |derivative| below this counts as zero
  std::uint64_t seed = 7;
  std::function<Vec(std::size_t)> point_source;  // overrides the Halton points when set
};

/// Finite-difference sign of dT_j/dx_j at quasi-random points; an entry is 0
/// unless every probe agrees on a strict sign.
Signature probe_signature(const FlatMap& map, std::size_t dim, const ProbeOptions& opts = {});

/// True when every output coordinate t is unchanged (to `tolerance`) by
/// perturbing inputs with index > t.
bool probe_triangular(const FlatMap& map, std::size_t dim, const ProbeOptions& opts = {}, double tolerance = 1e-12);

/// Halton point `index` in [0,1)^dim (bases = first primes).
Vec halton_point(std::size_t index, std::size_t dim);

}  // namespace tmscm::tri
