#pragma once

#include <cstdint>

namespace voleval {

// SplitMix64 (Steele, Lea, Flood 2014). Chosen as the toolkit's single
// random source because the algorithm is tiny, fully specified by these
// constants, and therefore portable: any implementation given the same
// seed reproduces the same stream bit for bit.
struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n); modulo bias is negligible for n << 2^64 and the
  // rule stays trivially portable.
  std::uint64_t next_below(std::uint64_t n) { return next() % n; }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
};

// Independent substream r of a base seed; used so bootstrap resamples
// and per-study generators are schedule independent under parallelism.
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t r) {
  SplitMix64 mixer(seed ^ (0xA0761D6478BD642Full * (r + 1)));
  return SplitMix64(mixer.next());
}

// Derived seed for a named consumer (metric tag, study index, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return substream(base, tag).next();
}

}  // namespace voleval
