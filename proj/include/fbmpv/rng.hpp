#pragma once

// Deterministic seeding and Gaussian draws.
//
// Stream splitting: path k under master seed m uses
//   seed_k = mix64(m + (k + 1) * 0x9E3779B97F4A7C15)
// where mix64 is the SplitMix64 finaliser. For fixed m the map k -> seed_k is
// injective (odd multiplier modulo 2^64 followed by a bijective mixer), so
// distinct paths never share a seed.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace fbmpv {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(master + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

// Standard normals from mt19937_64 via Box-Muller. std::normal_distribution is
// implementation-defined, which would break bit-for-bit reproducibility across
// standard libraries.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : engine_(seed) {}

  double uniform_open() {
    // 53 random bits mapped into (0, 1)
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fbmpv
