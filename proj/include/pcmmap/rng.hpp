#pragma once

#include <cstdint>

namespace pcmmap {

// SplitMix64 generator. Chosen over std::mt19937_64 because its output is a
// fixed function of the seed with no library-dependent distribution wrappers,
// so seeded runs reproduce bit-for-bit everywhere.
//
// Stream splitting: substream(seed, index) derives an independent generator
// per index. Batch producers (sampler rows, problem instances, dropout masks)
// use one substream per element index, which makes results independent of
// thread count and execution order.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
    return SplitMix64(mix(seed + 0x9E3779B97F4A7C15ull) ^
                      mix(index * 0xD1B54A32D192ED03ull + 0x8BB84B93962EACC9ull));
  }

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  // Uniform double in [0, 1), 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, bound) via multiply-shift.
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<__uint128_t>(next()) * bound) >> 64);
  }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::uint64_t state_;
};

}  // namespace pcmmap
