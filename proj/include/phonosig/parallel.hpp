#pragma once

// Index-parallel loop. Jobs write their results by index, so the outcome
// does not depend on the worker count or scheduling.

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace phonosig {

// Worker count from PHONOSIG_WORKERS, else the hardware concurrency.
std::size_t default_workers();

// Runs fn(i) for i in [0, n). If jobs throw, the exception of the lowest
// failing index is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers == 0) workers = 1;
  if (workers > n) workers = n;
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::atomic<bool> failed{false};
  auto work = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace phonosig
