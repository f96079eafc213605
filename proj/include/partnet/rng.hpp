#pragma once

#include <cstdint>
#include <span>

namespace partnet {

/**
 * Deterministic generator: xoshiro256** seeded through SplitMix64.
 *
 * Seeding: s[i] = splitmix64(x) for i = 0..3, where x starts at the seed and
 * splitmix64 is
 *   x += 0x9E3779B97F4A7C15;
 *   z = x; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
 *   z = (z ^ (z >> 27)) * 0x94D049BB133111EB; return z ^ (z >> 31);
 *
 * Step (xoshiro256**):
 *   out = rotl(s1 * 5, 7) * 9; t = s1 << 17;
 *   s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45);
 *
 * Derived draws use only integer arithmetic and IEEE basic operations
 * (plus log/sqrt/cos for normals), so streams agree across platforms.
 *   uniform()  = (next() >> 11) * 2^-53, in [0, 1)
 *   below(n)   = rejection sampling on the top bits, unbiased
 *   normal()   = Box-Muller, one value per call (the pair mate is discarded)
 */
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in [lo, hi] inclusive.
  int between(int lo, int hi);
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

// Stable derivation of independent sub-seeds (data, init, shuffling).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace partnet
