#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace levytrace {

enum class Execution { serial, parallel };

/// How index-parallel kernels are run. `workers == 0` means the OpenMP default.
/// Every kernel in the library produces identical output under both modes.
struct ExecutionPolicy {
  Execution mode = Execution::parallel;
  int workers = 0;

  static ExecutionPolicy serial() { return {Execution::serial, 1}; }
};

/// Worker count from an explicit flag, else LEVYTRACE_WORKERS, else 0 (default).
int resolve_workers(int flag);

/// Calls `fn(i)` for i in [0, n). Exceptions thrown by `fn` are rethrown on the
/// calling thread (the first one wins).
template <class Fn>
void for_each_index(std::size_t n, const ExecutionPolicy& policy, Fn&& fn) {
  if (policy.mode == Execution::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const long long count = static_cast<long long>(n);
#ifdef _OPENMP
  const int threads = policy.workers > 0 ? policy.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#endif
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace levytrace
