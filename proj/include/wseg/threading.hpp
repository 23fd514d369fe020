#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wseg {

// Global worker count for the compute kernels. Every parallel loop in this
// project assigns each output element to exactly one worker and keeps its
// reduction order fixed, so results are bitwise identical for any thread count.
inline int& thread_count_ref() {
    static int n = 1;
    return n;
}

inline void set_num_threads(int n) { thread_count_ref() = n < 1 ? 1 : n; }
inline int num_threads() { return thread_count_ref(); }

template <typename Fn>
void parallel_for(std::int64_t count, Fn&& fn) {
#ifdef _OPENMP
    const int nt = num_threads();
    if (nt > 1 && count > 1) {
#pragma omp parallel for schedule(static) num_threads(nt)
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
#endif
    for (std::int64_t i = 0; i < count; ++i) fn(i);
}

}  // namespace wseg
