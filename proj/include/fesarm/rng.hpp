#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace fesarm {

// splitmix64 finaliser, used to derive independent stream seeds from one run seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// PCG32 (XSH-RR variant, 64-bit state, selectable stream).
///
/// All randomness in the library goes through this generator so that a run is
/// fully determined by its integer seed, independent of the standard library's
/// distribution implementations. Normal variates use Box-Muller with the second
/// value cached.
class Pcg32 {
public:
  using result_type = std::uint32_t;

  explicit Pcg32(std::uint64_t seed = 0x853c49e6748fea9bULL, std::uint64_t stream = 0xda3e39cb94b95bdbULL) {
    reseed(seed, stream);
  }

  void reseed(std::uint64_t seed, std::uint64_t stream) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
    has_spare_ = false;
  }

  // Child generator for a named component (reset, targets, agent, ...).
  static Pcg32 derive(std::uint64_t run_seed, std::uint64_t component) {
    return Pcg32(splitmix64(run_seed ^ splitmix64(component)), splitmix64(component + 0x632be59bd9b4e019ULL));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u32(); }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = next_u32() >> 5;  // 27 bits
    const std::uint64_t lo = next_u32() >> 6;  // 26 bits
    return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint32_t below(std::uint32_t n) {
    // Lemire-style rejection to avoid modulo bias.
    const std::uint32_t threshold = (0u - n) % n;
    for (;;) {
      const std::uint32_t r = next_u32();
      if (r >= threshold) return r % n;
    }
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  bool operator==(const Pcg32&) const = default;

private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 1;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream identifiers for Pcg32::derive.
namespace streams {
inline constexpr std::uint64_t kReset = 1;
inline constexpr std::uint64_t kTargets = 2;
inline constexpr std::uint64_t kAgentInit = 3;
inline constexpr std::uint64_t kAgentSample = 4;
inline constexpr std::uint64_t kReplay = 5;
inline constexpr std::uint64_t kWarmup = 6;
inline constexpr std::uint64_t kEvaluation = 7;
inline constexpr std::uint64_t kCalibration = 8;
}  // namespace streams

}  // namespace fesarm
