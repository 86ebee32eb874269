#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace ogpit {

// SplitMix64 step; used for seeding and hash mixing.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Order-sensitive combination of 64-bit parts into one seed.
inline std::uint64_t hash64(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t state = 0x8edb1a1ee17da9d1ULL;
  std::uint64_t h = splitmix64(state);
  for (std::uint64_t p : parts) {
    state = h ^ (p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    h = splitmix64(state);
  }
  return h;
}

double normal_quantile(double p);

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730951); }

inline double normal_pdf(double x) {
  return 0.3989422804014327 * std::exp(-0.5 * x * x);
}

// xoshiro256++ stream. All stochastic behavior in the toolkit flows through
// this generator so that runs are reproducible from a single 64-bit seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the inverse CDF, one uniform per draw.
  double normal() {
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    return normal_quantile(u);
  }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    // Lemire rejection-free-ish bounded draw with a retry guard.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (0ULL - n) % n;
      while (lo < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Derives an independent stream without perturbing this one's future output.
  Rng split() {
    const std::uint64_t a = next_u64();
    const std::uint64_t b = next_u64();
    return Rng(hash64({a, b}));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> s_{};
};

// Van der Corput radical inverse in the given base, index >= 0.
inline double radical_inverse(std::uint64_t index, std::uint32_t base) {
  double inv = 1.0 / base;
  double factor = inv;
  double value = 0.0;
  while (index > 0) {
    value += static_cast<double>(index % base) * factor;
    index /= base;
    factor *= inv;
  }
  return value;
}

inline constexpr std::uint32_t kSmallPrimes[16] = {2,  3,  5,  7,  11, 13, 17, 19,
                                                   23, 29, 31, 37, 41, 43, 47, 53};

// Coordinate `dim` of the Sobol sequence at `index` (random-access form,
// 52-bit precision). Falls back to prime-base radical inversion beyond the
// tabulated dimensions.
double sobol_point(std::uint64_t index, int dim);

}  // namespace ogpit
