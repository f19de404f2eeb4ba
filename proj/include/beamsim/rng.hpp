#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace beamsim {

/// Deterministic random stream (xoshiro256++ seeded via splitmix64).
///
/// Self-contained on purpose: results must not depend on the standard
/// library's distribution implementations, so every draw here is defined
/// bit-for-bit. Independent streams for (seed, id) pairs let scenes be
/// generated in parallel without changing the output.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  /// Stream derived from a base seed and a stream id (e.g. a scene id).
  static Rng stream(uint64_t seed, uint64_t id, uint64_t tag = 0) {
    uint64_t a = id + 0x9E3779B97F4A7C15ull;
    uint64_t b = tag + 0xD1B54A32D192ED03ull;
    uint64_t x = seed;
    x ^= splitmix64(a);
    x ^= splitmix64(b) << 1;
    return Rng(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be >= 1.
  uint64_t uniform_int(uint64_t n) {
    // Rejection sampling over the smallest covering power of two.
    const uint64_t mask = mask_for(n);
    uint64_t v;
    do {
      v = next_u64() & mask;
    } while (v >= n);
    return v;
  }

  /// Standard normal via Box-Muller. Consumes two uniforms per call so the
  /// stream position does not depend on caller history.
  double normal() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9E3779B97F4A7C15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static uint64_t mask_for(uint64_t n) {
    uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    return mask;
  }

  std::array<uint64_t, 4> state_{};
};

}  // namespace beamsim
