#pragma once

#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tense {

// Thread count for embarrassingly parallel loops; TENSE_THREADS overrides.
inline unsigned thread_count() {
  if (const char* env = std::getenv("TENSE_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs fn(i) for i in [0, n). Work items must be independent; results written
// by index stay deterministic regardless of the thread count. The first
// exception thrown by a worker is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const unsigned threads = thread_count();
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const unsigned used = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  pool.reserve(used);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (unsigned t = 0; t < used; ++t) {
    pool.emplace_back([&fn, &error, &error_mutex, t, used, n] {
      try {
        for (std::size_t i = t; i < n; i += used) fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace tense
