#include "ogpit/rng.hpp"

#include <cmath>
#include <limits>

namespace ogpit {

namespace {

// Rational approximation of the standard normal quantile (Acklam 2003),
// refined below with one Halley step to full double precision.
double quantile_estimate(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  double x = quantile_estimate(p);
  // Halley refinement on Phi(x) - p = 0.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * 3.141592653589793) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

namespace {

// Direction numbers (Joe-Kuo) for the first ten Sobol dimensions, expanded
// to 52-bit fixed point.
struct SobolTable {
  static constexpr int kBits = 52;
  static constexpr int kDims = 10;
  std::uint64_t v[kDims][kBits];

  SobolTable() {
    struct Row {
      int s;
      std::uint32_t a;
      std::uint32_t m[5];
    };
    static constexpr Row rows[kDims - 1] = {
        {1, 0, {1, 0, 0, 0, 0}},    {2, 1, {1, 3, 0, 0, 0}},
        {3, 1, {1, 3, 1, 0, 0}},    {3, 2, {1, 1, 1, 0, 0}},
        {4, 1, {1, 1, 3, 3, 0}},    {4, 4, {1, 3, 5, 13, 0}},
        {5, 2, {1, 1, 5, 5, 17}},   {5, 4, {1, 1, 5, 5, 5}},
        {5, 7, {1, 1, 7, 11, 19}},
    };
    for (int k = 0; k < kBits; ++k) v[0][k] = 1ULL << (kBits - 1 - k);
    for (int d = 1; d < kDims; ++d) {
      const Row& r = rows[d - 1];
      for (int k = 0; k < r.s; ++k)
        v[d][k] = static_cast<std::uint64_t>(r.m[k]) << (kBits - 1 - k);
      for (int k = r.s; k < kBits; ++k) {
        std::uint64_t val = v[d][k - r.s] ^ (v[d][k - r.s] >> r.s);
        for (int i = 1; i < r.s; ++i) {
          if ((r.a >> (r.s - 1 - i)) & 1U) val ^= v[d][k - i];
        }
        v[d][k] = val;
      }
    }
  }
};

const SobolTable& sobol_table() {
  static const SobolTable table;
  return table;
}

}  // namespace

double sobol_point(std::uint64_t index, int dim) {
  if (dim >= SobolTable::kDims) return radical_inverse(index + 1, kSmallPrimes[dim]);
  const std::uint64_t* v = sobol_table().v[dim];
  std::uint64_t x = 0;
  int bit = 0;
  while (index != 0 && bit < SobolTable::kBits) {
    if (index & 1ULL) x ^= v[bit];
    index >>= 1;
    ++bit;
  }
  return static_cast<double>(x) * 0x1.0p-52;
}

}  // namespace ogpit
