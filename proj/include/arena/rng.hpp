#pragma once

// Deterministic, platform-independent randomness. Every stochastic stage of
// the pipeline derives its own stream from (master seed, stage tag, indices),
// so any stage can be replayed in isolation. std::<random> distributions are
// deliberately avoided: their output is implementation-defined.

#include <cstdint>
#include <string_view>
#include <vector>

namespace arena {

// 64-bit FNV-1a over a tag string; used only for stream derivation.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent child seed from a master seed, a stage tag, and up
// to two indices. Children with distinct (tag, a, b) are uncorrelated.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                    std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(master ^ fnv1a(tag));
  h = mix64(h ^ (a * 0xd6e8feb86659fd93ull));
  h = mix64(h ^ (b * 0xa0761d6478bd642full));
  return h;
}

// splitmix64 generator. Small state, full 64-bit output, reproducible
// everywhere. Quality is ample for sampling walks, documents and noise.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); n must be positive. Rejection-free modulo is
  // fine here: n is always tiny relative to 2^64.
  std::int64_t bounded(std::int64_t n) {
    return static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(n));
  }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t range(std::int64_t lo, std::int64_t hi) { return lo + bounded(hi - lo + 1); }

  bool bernoulli(double p) { return next_unit() < p; }

  // Index sampled proportionally to non-negative weights (at least one > 0).
  std::size_t weighted(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double x = next_unit() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      x -= weights[i];
      if (x < 0.0) return i;
    }
    return weights.size() - 1;
  }

  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[static_cast<std::size_t>(bounded(static_cast<std::int64_t>(items.size())))];
  }

 private:
  std::uint64_t state_;
};

}  // namespace arena
