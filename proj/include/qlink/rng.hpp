#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qlink {

/// Deterministic, splittable randomness for the simulator.
///
/// A master 64-bit seed is expanded with the splitmix64 mixer into
/// per-detector sub-stream seeds, so one configured seed reproduces every
/// trace of a run bit-for-bit. The per-stream engine is std::mt19937_64,
/// whose output sequence is fixed by the standard, so traces are portable
/// across platforms and standard libraries.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seed of sub-stream `tag` of master seed `seed`.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed + 0x9e3779b97f4a7c15ull * (tag + 1));
}

class stream {
 public:
  explicit stream(std::uint64_t seed) {
    // Expand the 64-bit seed into a full seed_seq so mt19937_64 does not
    // start from a low-entropy state.
    std::uint32_t words[8];
    std::uint64_t s = seed;
    for (int i = 0; i < 4; ++i) {
      s = splitmix64(s);
      words[2 * i] = static_cast<std::uint32_t>(s);
      words[2 * i + 1] = static_cast<std::uint32_t>(s >> 32);
    }
    std::seed_seq seq(words, words + 8);
    engine_.seed(seq);
  }

  static stream substream(std::uint64_t seed, std::uint64_t tag) {
    return stream(substream_seed(seed, tag));
  }

  std::uint64_t bits() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rng

namespace detail {

/// log Gamma(x) for x > 0 (Lanczos, g=7). Local so that sampling stays
/// thread-safe; the C lgamma writes the global signgam.
inline double log_gamma(double x) {
  static constexpr double coeff[9] = {
      0.99999999999980993,      676.5203681218851,    -1259.1392167224028,
      771.32342877765313,       -176.61502916214059,  12.507343278686905,
      -0.13857109526572012,     9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    // Reflection; not hit by count sampling but keeps the helper total.
    constexpr double pi = 3.14159265358979323846;
    return std::log(pi / std::sin(pi * x)) - log_gamma(1.0 - x);
  }
  x -= 1.0;
  double a = coeff[0];
  double t = x + 7.5;
  for (int i = 1; i < 9; ++i) a += coeff[i] / (x + i);
  constexpr double log_sqrt_2pi = 0.91893853320467274178;
  return log_sqrt_2pi + (x + 0.5) * std::log(t) - t + std::log(a);
}

}  // namespace detail
}  // namespace qlink
