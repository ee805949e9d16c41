#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>

#include <omp.h>

namespace tmscm {

/// `#pragma omp parallel for` over [0, n) that carries the first exception
/// out of the parallel region. Iterations must write disjoint outputs.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::exception_ptr error;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(tmscm_parallel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

inline int thread_count() { return omp_get_max_threads(); }
inline void set_thread_count(int n) {
  if (n > 0) omp_set_num_threads(n);
}

}  // namespace tmscm
