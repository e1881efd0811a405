#ifndef BTO_PARALLEL_HPP
#define BTO_PARALLEL_HPP

#include <cstddef>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace bto {

/// Execution policy for the data-parallel kernels (probe sweeps, truncation
/// builds, Gram assembly).  Serial is the reference path kept for testing;
/// Parallel uses OpenMP when compiled in and falls back to serial otherwise.
enum class Exec { Serial, Parallel };

inline bool openmp_enabled() {
#if defined(_OPENMP)
  return true;
#else
  return false;
#endif
}

template <typename Fn>
void parallel_for(Exec exec, std::size_t n, Fn&& fn) {
  if (exec == Exec::Parallel) {
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic, 4)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      fn(static_cast<std::size_t>(i));
    return;
#endif
  }
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

}  // namespace bto

#endif  // BTO_PARALLEL_HPP
