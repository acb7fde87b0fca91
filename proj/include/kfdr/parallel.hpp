#pragma once

#include <cstddef>
#include <exception>

namespace kfdr {

/// Execution policy for the data-parallel kernels. `Serial` is the reference
/// path kept for testing; `Parallel` distributes iterations with OpenMP.
/// Every kernel writes per-iteration results into preallocated slots and
/// reduces them in index order afterwards, so both policies return
/// bit-identical values.
enum class Exec { Serial, Parallel };

inline constexpr Exec kDefaultExec = Exec::Parallel;

/// Runs body(i) for i in [0, n). Iterations must be independent. The first
/// exception thrown by any iteration (lowest index wins) is rethrown after
/// the loop.
template <typename Body>
void for_each_index(Exec exec, std::size_t n, Body&& body) {
  if (exec == Exec::Serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::size_t failed_at = n;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(kfdr_for_each_index)
      if (static_cast<std::size_t>(i) < failed_at) {
        failed_at = static_cast<std::size_t>(i);
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Number of worker threads the parallel policy would use.
int parallel_threads();

}  // namespace kfdr
