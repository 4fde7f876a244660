#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <vector>

#include <omp.h>

namespace attninf {

// Runs fn(i) for i in [0, n) on `threads` OpenMP threads (0 = runtime
// default). Exceptions cannot cross an OpenMP region, so they are captured per
// index and the one from the lowest failing index is rethrown afterwards.
template <typename Fn>
void parallel_for_index(std::size_t n, int threads, Fn&& fn) {
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (threads <= 0) threads = omp_get_max_threads();
  std::vector<std::exception_ptr> errors(n);
  const auto total = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t i = 0; i < total; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace attninf
