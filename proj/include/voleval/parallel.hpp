#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace voleval {

// Runs fn(i) for i in [0, n) on up to n_workers threads. Work items are
// claimed through a shared counter; callers must make results depend
// only on i, never on scheduling order. The first exception thrown by
// any worker is rethrown on the calling thread.
inline void parallel_for(std::size_t n, unsigned n_workers,
                         const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (n_workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);  // stop claiming further work
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const unsigned count =
      static_cast<unsigned>(std::min<std::size_t>(n_workers, n));
  threads.reserve(count);
  for (unsigned t = 0; t < count; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace voleval
