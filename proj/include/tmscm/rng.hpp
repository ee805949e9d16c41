#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tmscm {

using Vec = std::vector<double>;

/// splitmix64 finalizer; used to derive independent substreams.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for substream `index` of a run seeded with `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Per-sample stream; batch loops use this so results do not depend on
  // thread count or iteration order.
  static Rng stream(std::uint64_t seed, std::uint64_t index) { return Rng(derive_seed(seed, index)); }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

  Vec normal_vector(std::size_t n) {
    Vec out(n);
    for (auto& x : out) x = normal();
    return out;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace tmscm
