#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace specmesh {

/// Thread cap from SPECMESH_THREADS, or 0 when unset.
inline int thread_cap_from_env() {
  const char* v = std::getenv("SPECMESH_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  try {
    return std::max(1, std::stoi(v));
  } catch (...) {
    return 0;
  }
}

inline void apply_thread_cap() {
#ifdef _OPENMP
  if (int cap = thread_cap_from_env(); cap > 0) omp_set_num_threads(cap);
#endif
}

/// Runs fn(i) for i in [0, n). Iterations must write disjoint outputs; results
/// are then independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
#ifdef _OPENMP
  if (n > 1) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) fn(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

/// parallel_for for bodies that may throw: every iteration runs, then the
/// exception from the lowest failing index is rethrown.
template <typename Fn>
void parallel_for_each_or_throw(std::size_t n, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  parallel_for(n, [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace specmesh
