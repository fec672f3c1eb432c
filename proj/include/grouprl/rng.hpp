#pragma once

#include <cmath>
#include <cstdint>

namespace grouprl {

// Counter-derived pseudo-random streams. Every stream is addressed by a
// (seed, a, b, c) tuple, so rollouts for different (prompt, rollout) pairs
// can run on any thread in any order and still reproduce bit-identically.
// Integer-only arithmetic keeps the sequences identical across platforms.

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class RngStream {
 public:
  explicit RngStream(uint64_t stream_seed) : state_(stream_seed) {
    // Burn-in round decorrelates nearby seeds.
    splitmix64(state_);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream from up to three lane indices.
inline RngStream derive_stream(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  uint64_t s = seed;
  uint64_t h = splitmix64(s);
  s ^= a * 0xA24BAED4963EE407ULL;
  h ^= splitmix64(s);
  s ^= b * 0x9FB21C651E98DF25ULL;
  h ^= splitmix64(s);
  s ^= c * 0xD6E8FEB86659FD93ULL;
  h ^= splitmix64(s);
  return RngStream(h);
}

}  // namespace grouprl
