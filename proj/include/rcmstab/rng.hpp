#pragma once

#include <cstdint>

namespace rcmstab {

/// Deterministic, platform-independent generator (splitmix64). Distributions
/// are derived from the raw 64-bit stream so output never depends on the
/// standard library's unspecified algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double sign() { return (next_u64() & 1ull) ? 1.0 : -1.0; }

  /// Derive an independent stream id from up to three indices.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    Rng r(a);
    r.state_ ^= 0x2545f4914f6cdd1dull * (b + 1);
    r.next_u64();
    r.state_ ^= 0x9e3779b97f4a7c15ull * (c + 1);
    r.next_u64();
    return r.state_;
  }

 private:
  std::uint64_t state_;
};

}  // namespace rcmstab
