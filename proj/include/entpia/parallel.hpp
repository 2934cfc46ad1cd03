#pragma once

// Node-wise parallel loops. Each iteration writes only its own outputs, so results
// do not depend on the thread count. Exceptions thrown inside the loop are
// captured and the one from the lowest index is rethrown on the calling thread.

#include <cstddef>
#include <exception>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace entpia {

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <class F>
void parallel_for(std::size_t n, F&& body) {
  std::exception_ptr first;
  std::size_t first_index = std::numeric_limits<std::size_t>::max();
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(entpia_parallel_error)
      {
        if (static_cast<std::size_t>(i) < first_index) {
          first_index = static_cast<std::size_t>(i);
          first = std::current_exception();
        }
      }
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace entpia
