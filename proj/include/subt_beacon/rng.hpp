#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace subt_beacon::rng {

/// Folds a stream name into a base seed (FNV-1a), so every consumer of
/// randomness in an episode draws from its own named stream.
inline std::uint64_t substream_seed(std::uint64_t base, std::string_view name) {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  h ^= base + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h ? h : 1;
}

/// splitmix64-style mix of two words, used to derive per-scan seeds from
/// data that both live runs and replays can see.
inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Deterministic sampler over mt19937_64. The distribution shapes are
/// hand-rolled (Box-Muller, Knuth) so identical seeds produce identical
/// draws regardless of the standard library implementation.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return (gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t integer(std::uint64_t n) { return gen_() % n; }

  double normal(double mean, double sigma) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::int64_t poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda > 30.0) return poisson(lambda / 2.0) + poisson(lambda / 2.0);
    const double limit = std::exp(-lambda);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace subt_beacon::rng
