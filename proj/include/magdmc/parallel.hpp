#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace magdmc {

/// Runs body(i) for i in [0, n) across OpenMP threads. The first exception
/// thrown by any iteration is rethrown on the calling thread.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  std::exception_ptr error;
  std::mutex m;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard lock(m);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace magdmc
