#pragma once

#include <cstdint>

namespace fsgrpo {

// SplitMix64 (Steele, Lea & Flood, "Fast splittable pseudorandom number
// generators", 2014). The whole stream is defined by pure 64-bit integer
// arithmetic, so a seeded run produces the same draws on every platform,
// which is what makes the golden sequences in the tests portable.
//
// Derived streams: split(stream) hashes the current state together with the
// stream id and does not advance the parent. Calling split with distinct ids
// yields statistically independent generators.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) built from the top 53 bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [lo, hi], inclusive. Uses a plain modulo reduction;
  // the bias is negligible for the small ranges used here and the exact
  // mapping is part of the frozen sequence contract.
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1ull;
    return lo + static_cast<int>(next_u64() % span);
  }

  bool bernoulli(double p) { return next_double() < p; }

  SplitMix64 split(std::uint64_t stream) const {
    std::uint64_t z = state_ ^ (0x9E3779B97F4A7C15ull * (stream + 1ull));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return SplitMix64(z ^ (z >> 31));
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace fsgrpo
