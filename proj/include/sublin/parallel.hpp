#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sublin {

inline void set_num_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int num_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace detail {

// Each index writes only its own outputs, so results do not depend on the
// schedule. Small ranges stay serial.
template <typename Fn>
void parallel_for(std::ptrdiff_t n, Fn&& fn, std::ptrdiff_t min_parallel = 4096) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n >= min_parallel)
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
#else
    (void)min_parallel;
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace detail
}  // namespace sublin
