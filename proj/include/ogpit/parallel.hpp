#pragma once

#include <cstddef>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ogpit::par {

// Global switch between the OpenMP kernels and the serial reference path.
// Both paths produce bitwise-identical results for independent bodies:
// parallel loops only fill independent slots, reductions stay serial.
bool enabled() noexcept;
void set_enabled(bool on) noexcept;

inline int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Serial reference: body(i) for i in [0, n).
template <class F>
void map_serial(std::ptrdiff_t n, F&& body) {
  for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
}

// OpenMP kernel. Falls back to the serial path when disabled, when the loop
// is too small to amortize fork/join, or when already inside a parallel
// region (grid cells run whole optimizations per thread).
template <class F>
void map(std::ptrdiff_t n, F&& body) {
#ifdef _OPENMP
  if (enabled() && n >= 32 && !omp_in_parallel()) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  map_serial(n, std::forward<F>(body));
}

}  // namespace ogpit::par
