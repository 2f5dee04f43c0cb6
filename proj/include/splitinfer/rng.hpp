#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace splitinfer {

// SplitMix64. Chosen over <random> engines+distributions because the output
// sequence must be identical across compilers and languages.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t Next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Box-Muller; consumes two draws per call.
  double Normal() {
    double u1 = Uniform();
    const double u2 = Uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  uint64_t state_;
};

// Derives an independent stream seed from a base seed and a tag.
inline uint64_t MixSeed(uint64_t seed, uint64_t tag) {
  SplitMix64 g(seed ^ (tag * 0xD1B54A32D192ED03ULL));
  return g.Next();
}

}  // namespace splitinfer
