#pragma once

#include <cmath>
#include <cstdint>

namespace fbsoc {

/// Counter-based random numbers. Every variate is a pure function of its
/// key, so streams can be evaluated in any order by any number of workers
/// and still reproduce bit-identically.
namespace rng {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t path,
                         std::uint64_t step, std::uint64_t channel) {
  std::uint64_t h = mix(seed ^ 0x5851f42d4c957f2dULL);
  h = mix(h ^ path);
  h = mix(h ^ (step + 0x14057b7ef767814fULL));
  h = mix(h ^ (channel + 0x2545f4914f6cdd1dULL));
  return h;
}

/// Uniform in (0, 1]; never returns 0 so it is safe inside log().
inline double uniform01(std::uint64_t bits) {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two counter-derived uniforms.
inline double normal(std::uint64_t seed, std::uint64_t path,
                     std::uint64_t step, std::uint64_t channel) {
  const std::uint64_t k = key(seed, path, step, channel);
  const double u1 = uniform01(mix(k ^ 0x452821e638d01377ULL));
  const double u2 = uniform01(mix(k ^ 0xbe5466cf34e90c6cULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

}  // namespace rng

/// A sequential deterministic stream for sampling tasks that are not tied
/// to a (path, step) cell: gradient-check probes, convexity probes, etc.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t next_bits() {
    return rng::key(seed_, stream_, counter_++, 0);
  }
  /// Uniform in (0, 1].
  double uniform() { return rng::uniform01(next_bits()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    const std::uint64_t k = next_bits();
    const double u1 = rng::uniform01(rng::mix(k ^ 0x452821e638d01377ULL));
    const double u2 = rng::uniform01(rng::mix(k ^ 0xbe5466cf34e90c6cULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(rng::kTwoPi * u2);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace fbsoc
