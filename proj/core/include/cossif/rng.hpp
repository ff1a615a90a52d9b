#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace cossif {

/// SplitMix64 (Steele, Lea & Flood, 2014). Every randomized step in the
/// toolkit (transform parameters, train/test shuffles) draws from this
/// generator so that third parties can reproduce outputs from the seed
/// alone. The full recurrence is:
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   output = z ^ (z >> 31)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1): the top 53 bits scaled by 2^-53.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  bool next_bool() { return (next_u64() >> 63) != 0; }

  /// Unbiased integer in [0, n) by rejection sampling.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % n;
  }

  /// Fisher-Yates: for i = n-1 down to 1, j = bounded(i+1), swap(v[i], v[j]).
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

/// FNV-1a over the raw bytes of `s`.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Derives a child seed: SplitMix64(seed ^ fnv1a64(tag)).next_u64().
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
  return SplitMix64(seed ^ fnv1a64(tag)).next_u64();
}

/// Derives a child seed: SplitMix64(seed ^ x).next_u64().
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t x) {
  return SplitMix64(seed ^ x).next_u64();
}

}  // namespace cossif
