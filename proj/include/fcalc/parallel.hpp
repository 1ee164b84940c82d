#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace fcalc {

// Global cap on worker threads, settable from the CLI (--threads).
inline std::atomic<unsigned>& thread_budget() {
  static std::atomic<unsigned> budget{0};  // 0 = hardware default
  return budget;
}

inline void set_thread_budget(unsigned n) { thread_budget().store(n); }

inline unsigned effective_threads() {
  unsigned cap = thread_budget().load();
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return cap == 0 ? hw : std::min(cap, hw);
}

// Deterministic parallel loop: static block partition, callers write results
// by index into preallocated storage. Reductions must be done afterwards in
// index order so outputs do not depend on scheduling.
template <typename F>
void parallel_for(std::size_t n, F&& body, unsigned threads = 0) {
  if (n == 0) return;
  unsigned t = threads == 0 ? effective_threads() : threads;
  t = static_cast<unsigned>(std::min<std::size_t>(t, n));
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  auto run_block = [&](std::size_t lo, std::size_t hi) {
    try {
      for (std::size_t i = lo; i < hi && !failed.load(std::memory_order_relaxed); ++i) body(i);
    } catch (...) {
      if (!failed.exchange(true)) first_error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(t - 1);
  std::size_t chunk = (n + t - 1) / t;
  for (unsigned k = 1; k < t; ++k) {
    std::size_t lo = k * chunk;
    if (lo >= n) break;
    pool.emplace_back(run_block, lo, std::min(n, lo + chunk));
  }
  run_block(0, std::min(n, chunk));
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace fcalc
