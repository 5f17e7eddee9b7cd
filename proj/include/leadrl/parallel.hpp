#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace leadrl {

/// Worker count: hardware concurrency, capped by the LEADRL_THREADS
/// environment variable when set (minimum 1).
inline std::int32_t worker_count() {
  std::int32_t n = static_cast<std::int32_t>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("LEADRL_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) n = std::min(n, cap);
    } catch (const std::exception&) {
      // Unparseable cap: ignore and keep the hardware default.
    }
  }
  return n;
}

/// Run fn(i) for i in [0, n). Results must go to independent slots so output
/// is identical for any worker count. The first exception thrown by a worker
/// is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn, std::int32_t workers = 0) {
  if (n <= 0) return;
  if (workers <= 0) workers = worker_count();
  if (workers == 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  auto body = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n || failed.load(std::memory_order_relaxed)) return;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::int64_t spawn = std::min<std::int64_t>(workers, n);
  pool.reserve(static_cast<std::size_t>(spawn));
  for (std::int64_t w = 0; w < spawn; ++w) pool.emplace_back(body);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace leadrl
