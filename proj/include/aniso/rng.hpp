#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace aniso {

// Deterministic splittable random stream built on PCG32 (O'Neill's
// pcg32_random_r, minimal variant). A stream is fully identified by
// (seed, stream_id); derived streams hash a child key into the stream id,
// so parallel consumers get independent, scheduling-invariant sequences.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    state_ = 0u;
    inc_ = (stream_id << 1u) | 1u;
    next_u32();
    state_ += mix64(seed ^ mix64(stream_id));
    next_u32();
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Child stream with an independent sequence; same (seed, key) pair always
  // yields the same child regardless of how many numbers the parent drew.
  RngStream derived(std::uint64_t key) const {
    return RngStream(seed_, mix64(stream_id_ ^ mix64(key + 0x9E3779B97F4A7C15ull)));
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    const std::uint32_t xorshifted =
        static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer uniform on [0, n) without modulo bias (Lemire-style rejection).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t threshold = (-n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(theta);
    has_spare_ = true;
    return radius * std::cos(theta);
  }

 private:
  static std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
  std::uint64_t inc_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Named sub-stream keys so every consumer of a test-level stream is
// reproducible independent of call order.
namespace stream_key {
inline constexpr std::uint64_t coords = 1;
inline constexpr std::uint64_t field = 2;
inline constexpr std::uint64_t observed_fit = 3;
inline constexpr std::uint64_t replicates = 4;
inline constexpr std::uint64_t subsample = 5;
inline constexpr std::uint64_t angles = 6;
inline constexpr std::uint64_t starts = 7;
}  // namespace stream_key

}  // namespace aniso
