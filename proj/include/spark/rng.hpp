// Seedable PRNG pinned for reproducibility: SplitMix64 streams with
// Box-Muller normals. Stream ids give independent, order-free sequences for
// concurrent consumers (one stream per network, per noise draw, ...), so
// outputs do not depend on scheduling.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace spark {

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(seed ^ (0x9E3779B97F4A7C15ull * (stream + 1))) {
    // burn-in decorrelates nearby seeds/streams
    next_u64();
    next_u64();
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; generates pairs, caches the second value
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) { u1 = uniform(); }
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = mag * std::sin(ang);
    have_spare_ = true;
    return mag * std::cos(ang);
  }

  static constexpr const char* id() { return "splitmix64+boxmuller"; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace spark
