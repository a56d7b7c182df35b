#ifndef TELEMC_RANDOM_HPP
#define TELEMC_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace telemc {

// splitmix64 step; used to decorrelate user seeds and to derive sub-streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seeded random source with explicitly coded draw paths, so that identical
// seeds give identical streams regardless of standard-library internals.
// Normal draws use Box-Muller on two fresh uniforms per call (no cached
// second value); the engine state is the only mutable state.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    engine_.seed(splitmix64(s));
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on {0, ..., n-1} by rejection; n must be positive.
  int uniform_int(int n) {
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<int>(x % un);
  }

  double normal() {
    // 1 - uniform() lies in (0, 1], keeping the log argument positive.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Deterministic sub-stream key for (seed, epoch, index) triples.
  static std::uint64_t substream_seed(std::uint64_t base, std::uint64_t epoch,
                                      std::uint64_t index) {
    std::uint64_t s = base;
    std::uint64_t a = splitmix64(s);
    s = a ^ (epoch * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
    std::uint64_t b = splitmix64(s);
    s = b ^ (index * 0xda942042e4dd58b5ULL + 0x9216d5d98979fb1bULL);
    return splitmix64(s);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace telemc

#endif
