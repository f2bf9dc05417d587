#pragma once

// Replica fan-out. Every replica is a pure function of its index, results are
// stored by index, and callers reduce in index order, so the parallel kernel
// is bit-identical to the serial reference for any worker count.

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <type_traits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rrw {

/// Worker count from RRW_WORKERS, else the OpenMP default.
inline int default_workers() {
  if (const char* env = std::getenv("RRW_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <class Fn>
auto map_replicas_serial(std::size_t count, Fn&& fn) {
  using R = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<R> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
  return out;
}

template <class Fn>
auto map_replicas(std::size_t count, int workers, Fn&& fn) {
  using R = std::invoke_result_t<Fn&, std::size_t>;
  if (workers <= 1) return map_replicas_serial(count, fn);
  std::vector<R> out(count);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto n = static_cast<long long>(count);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 64)
  for (long long i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace rrw
