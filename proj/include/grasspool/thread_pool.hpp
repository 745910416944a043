#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace grasspool {

// Worker count for parallel maps: GRASSPOOL_THREADS if set, else the
// logical CPU count.
inline unsigned worker_count() {
  if (const char* env = std::getenv("GRASSPOOL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Run fn(i) for i in [0, count) on a small worker pool. Callers write into
// index-addressed slots, so results are ordered deterministically no matter
// how the work interleaves. The first exception wins and is rethrown.
template <typename Fn>
void parallel_for_indexed(std::size_t count, Fn&& fn) {
  const unsigned workers =
      std::min<std::size_t>(worker_count(), count ? count : 1);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (!failed.load(std::memory_order_relaxed)) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        try {
          fn(i);
        } catch (...) {
          bool expected = false;
          if (failed.compare_exchange_strong(expected, true)) {
            error = std::current_exception();
          }
          break;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace grasspool
