#include "tmscm/triangular.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "tmscm/error.hpp"

namespace tmscm::tri {

Signature::Signature(std::vector<int> entries) : entries_(std::move(entries)) {
  for (int e : entries_)
    require(e == -1 || e == 0 || e == 1, ErrorCode::ConfigError, "signature entries must be -1, 0 or +1");
}

bool Signature::is_tm() const {
  return std::none_of(entries_.begin(), entries_.end(), [](int e) { return e == 0; });
}

bool Signature::is_tmi() const {
  return std::all_of(entries_.begin(), entries_.end(), [](int e) { return e == 1; });
}

Signature Signature::slice(std::size_t first, std::size_t last) const {
  require(first <= last && last < entries_.size(), ErrorCode::BadRange, "signature slice out of range");
  return Signature(std::vector<int>(entries_.begin() + static_cast<std::ptrdiff_t>(first),
                                    entries_.begin() + static_cast<std::ptrdiff_t>(last) + 1));
}

Signature operator*(const Signature& a, const Signature& b) {
  require(a.size() == b.size(), ErrorCode::DimMismatch, "signature sizes differ");
  std::vector<int> out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] * b[j];
  return Signature(std::move(out));
}

Signature concat(const Signature& a, const Signature& b) {
  std::vector<int> out = a.entries();
  out.insert(out.end(), b.entries().begin(), b.entries().end());
  return Signature(std::move(out));
}

TriangularMap::TriangularMap(std::size_t dim, Signature signature, ComponentFn component,
                             std::optional<ComponentInverseFn> inverse, FlatMap full)
    : dim_(dim),
      signature_(std::move(signature)),
      component_(std::move(component)),
      inverse_(std::move(inverse)),
      full_(std::move(full)) {
  require(signature_.size() == dim_, ErrorCode::DimMismatch, "signature length differs from map dimension");
}

TriangularMap TriangularMap::identity(std::size_t d) {
  return TriangularMap(
      d, Signature::increasing(d), [](std::size_t j, std::span<const double> x) { return x[j]; },
      [](std::size_t, std::span<const double>, double z) { return z; }, [](const Vec& x) { return x; });
}

TriangularMap TriangularMap::lower_affine(std::vector<double> L, Vec b) {
  const std::size_t d = b.size();
  require(L.size() == d * d, ErrorCode::ShapeMismatch, "lower_affine expects a d*d matrix");
  std::vector<int> sig(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double diag = L[j * d + j];
    sig[j] = diag > 0 ? 1 : (diag < 0 ? -1 : 0);
  }
  auto comp = [L, b, d](std::size_t j, std::span<const double> x) {
    double s = b[j];
    for (std::size_t k = 0; k <= j; ++k) s += L[j * d + k] * x[k];
    return s;
  };
  auto inv = [L, b, d](std::size_t j, std::span<const double> prefix, double z) {
    double s = z - b[j];
    for (std::size_t k = 0; k < j; ++k) s -= L[j * d + k] * prefix[k];
    return s / L[j * d + j];
  };
  return TriangularMap(d, Signature(sig), comp, inv);
}

double TriangularMap::invert_component(std::size_t j, std::span<const double> prefix, double z) const {
  if (inverse_) return (*inverse_)(j, prefix, z);
  require(signature_[j] != 0, ErrorCode::NotMonotone, "component " + std::to_string(j) + " has zero signature");
  Vec x(prefix.begin(), prefix.begin() + static_cast<std::ptrdiff_t>(j));
  x.push_back(z);
  auto g = [&](double s) {
    x[j] = s;
    return component_(j, x);
  };
  return solve_monotone(g, signature_[j], z, z);
}

Vec TriangularMap::operator()(const Vec& x) const {
  require(x.size() == dim_, ErrorCode::ShapeMismatch, "input length differs from map dimension");
  if (full_) return full_(x);
  Vec out(dim_);
  for (std::size_t j = 0; j < dim_; ++j) out[j] = component_(j, std::span<const double>(x.data(), j + 1));
  return out;
}

FlatMap TriangularMap::as_flat_map() const {
  return [self = *this](const Vec& x) { return self(x); };
}

double solve_monotone(const std::function<double(double)>& g, int direction, double target, double start,
                      const RootOptions& opts) {
  require(direction == 1 || direction == -1, ErrorCode::NotMonotone, "root finding needs a strict direction");
  auto f = [&](double s) {
    const double v = direction * (g(s) - target);
    if (!std::isfinite(v)) fail(ErrorCode::NoBracket, "non-finite component value while bracketing");
    return v;
  };

  const double f0 = f(start);
  if (f0 == 0.0) return start;
  double lo = start, hi = start;
  double step = opts.initial_step;
  bool found = false;
  for (int k = 0; k < opts.max_doublings; ++k) {
    if (f0 < 0) {
      hi = start + step;
      if (f(hi) >= 0) { found = true; break; }
      lo = hi;
    } else {
      lo = start - step;
      if (f(lo) <= 0) { found = true; break; }
      hi = lo;
    }
    step *= opts.growth;
  }
  if (!found) fail(ErrorCode::NoBracket, "could not bracket the root within the expansion limit");

  while (hi - lo > opts.bisection_width) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < 0) lo = mid; else hi = mid;
  }
  double s = lo + 0.5 * (hi - lo);
  double fs = f(s);
  const double slack = std::max(opts.bisection_width, hi - lo);
  for (int k = 0; k < opts.newton_steps && fs != 0.0; ++k) {
    const double h = 1e-7 * std::max(1.0, std::abs(s));
    const double deriv = (f(s + h) - f(s - h)) / (2 * h);
    if (!(deriv > 0) || !std::isfinite(deriv)) break;
    const double next = s - fs / deriv;
    if (next < lo - slack || next > hi + slack) break;
    const double fn = f(next);
    if (std::abs(fn) >= std::abs(fs)) break;
    s = next;
    fs = fn;
  }
  return s;
}

Vec invert(const TriangularMap& map, const Vec& z) {
  require(z.size() == map.dim(), ErrorCode::ShapeMismatch, "input length differs from map dimension");
  require(map.signature().is_tm(), ErrorCode::NotMonotone, "cannot invert a map whose signature has zeros");
  Vec x(map.dim());
  for (std::size_t j = 0; j < map.dim(); ++j)
    x[j] = map.invert_component(j, std::span<const double>(x.data(), j), z[j]);
  return x;
}

TriangularMap compose(const TriangularMap& outer, const TriangularMap& inner) {
  require(outer.dim() == inner.dim(), ErrorCode::DimMismatch, "composed maps must have equal dimension");
  const std::size_t d = outer.dim();
  auto inner_prefix = [inner](std::span<const double> x, std::size_t count) {
    Vec y(count);
    for (std::size_t k = 0; k < count; ++k) y[k] = inner.component(k, x.first(k + 1));
    return y;
  };
  auto comp = [outer, inner_prefix](std::size_t j, std::span<const double> x) {
    Vec y = inner_prefix(x, j + 1);
    return outer.component(j, y);
  };
  auto inv = [outer, inner, inner_prefix](std::size_t j, std::span<const double> prefix, double z) {
    Vec y = inner_prefix(prefix, j);
    const double yj = outer.invert_component(j, y, z);
    return inner.invert_component(j, prefix, yj);
  };
  auto full = [outer, inner](const Vec& x) { return outer(inner(x)); };
  return TriangularMap(d, outer.signature() * inner.signature(), comp, inv, full);
}

TriangularMap inverse_view(const TriangularMap& map) {
  require(map.signature().is_tm(), ErrorCode::NotMonotone, "inverse of a map whose signature has zeros");
  auto preimage = [map](std::span<const double> z, std::size_t count) {
    Vec x(count);
    for (std::size_t k = 0; k < count; ++k) x[k] = map.invert_component(k, std::span<const double>(x.data(), k), z[k]);
    return x;
  };
  auto comp = [preimage](std::size_t j, std::span<const double> z) { return preimage(z, j + 1)[j]; };
  auto inv = [map, preimage](std::size_t j, std::span<const double> prefix, double w) {
    Vec x = preimage(prefix, j);
    x.push_back(w);
    return map.component(j, x);
  };
  auto full = [map](const Vec& z) { return invert(map, z); };
  return TriangularMap(map.dim(), map.signature(), comp, inv, full);
}

TriangularMap slice(const TriangularMap& map, std::size_t first, std::size_t last, std::span<const double> prefix) {
  require(first <= last && last < map.dim(), ErrorCode::BadRange, "slice range out of bounds");
  require(prefix.size() == first, ErrorCode::BadRange, "slice prefix must hold exactly `first` coordinates");
  const Vec frozen(prefix.begin(), prefix.end());
  const std::size_t d = last - first + 1;
  auto comp = [map, frozen, first](std::size_t j, std::span<const double> x) {
    Vec full = frozen;
    full.insert(full.end(), x.begin(), x.begin() + static_cast<std::ptrdiff_t>(j) + 1);
    return map.component(first + j, full);
  };
  auto inv = [map, frozen, first](std::size_t j, std::span<const double> p, double z) {
    Vec full = frozen;
    full.insert(full.end(), p.begin(), p.begin() + static_cast<std::ptrdiff_t>(j));
    return map.invert_component(first + j, full, z);
  };
  return TriangularMap(d, map.signature().slice(first, last), comp, inv);
}

namespace {

constexpr std::size_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                   59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

double radical_inverse(std::size_t index, std::size_t base) {
  double result = 0.0, f = 1.0 / static_cast<double>(base);
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= static_cast<double>(base);
  }
  return result;
}

Vec probe_point(const ProbeOptions& opts, std::size_t index, std::size_t dim) {
  if (opts.point_source) return opts.point_source(index);
  static const boost::math::normal_distribution<double> standard;
  // Random shift (Cranley-Patterson) keeps points off the lattice origin.
  Rng rng(opts.seed);
  Vec shift(dim);
  for (auto& s : shift) s = rng.uniform();
  Vec h = halton_point(index + 1, dim);
  for (std::size_t k = 0; k < dim; ++k) {
    double p = h[k] + shift[k];
    p -= std::floor(p);
    p = std::clamp(p, 1e-6, 1 - 1e-6);
    h[k] = opts.spread * boost::math::quantile(standard, p);
  }
  return h;
}

}  // namespace

Vec halton_point(std::size_t index, std::size_t dim) {
  Vec out(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    const std::size_t base = k < std::size(kPrimes) ? kPrimes[k] : kPrimes[k % std::size(kPrimes)] + 2 * k;
    out[k] = radical_inverse(index, base);
  }
  return out;
}

Signature probe_signature(const FlatMap& map, std::size_t dim, const ProbeOptions& opts) {
  std::vector<int> positive(dim, 0), negative(dim, 0);
  for (std::size_t p = 0; p < opts.points; ++p) {
    Vec x = probe_point(opts, p, dim);
    for (std::size_t j = 0; j < dim; ++j) {
      Vec hi = x, lo = x;
      hi[j] += opts.step;
      lo[j] -= opts.step;
      const double deriv = (map(hi)[j] - map(lo)[j]) / (2 * opts.step);
      if (deriv > opts.tolerance) ++positive[j];
      else if (deriv < -opts.tolerance) ++negative[j];
    }
  }
  std::vector<int> sig(dim, 0);
  const int n = static_cast<int>(opts.points);
  for (std::size_t j = 0; j < dim; ++j) sig[j] = positive[j] == n ? 1 : (negative[j] == n ? -1 : 0);
  return Signature(std::move(sig));
}

bool probe_triangular(const FlatMap& map, std::size_t dim, const ProbeOptions& opts, double tolerance) {
  Rng rng(derive_seed(opts.seed, 1));
  for (std::size_t p = 0; p < opts.points; ++p) {
    const Vec x = probe_point(opts, p, dim);
    const Vec base = map(x);
    for (std::size_t t = 0; t + 1 < dim; ++t) {
      Vec moved = x;
      for (std::size_t k = t + 1; k < dim; ++k) moved[k] += rng.uniform(-1.0, 1.0);
      const Vec out = map(moved);
      for (std::size_t k = 0; k <= t; ++k)
        if (std::abs(out[k] - base[k]) > tolerance * (1.0 + std::abs(base[k]))) return false;
    }
  }
  return true;
}

}  // namespace tmscm::tri
