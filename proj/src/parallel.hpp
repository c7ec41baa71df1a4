#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace bookalign::detail {

/// Runs fn(0..count-1) on up to `workers` threads. Every task runs even if
/// some fail; afterwards the lowest-index failure is rethrown, so the observed
/// outcome does not depend on scheduling.
inline void parallel_for(unsigned workers, size_t count,
                         const std::function<void(size_t)>& fn) {
  if (count == 0) return;
  std::vector<std::exception_ptr> failures(count);
  if (workers <= 1 || count == 1) {
    for (size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<size_t> next{0};
    const unsigned n_threads = static_cast<unsigned>(
        std::min<size_t>(workers, count));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned w = 0; w < n_threads; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const size_t i = next.fetch_add(1);
          if (i >= count) return;
          try {
            fn(i);
          } catch (...) {
            failures[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : failures)
    if (e) std::rethrow_exception(e);
}

}  // namespace bookalign::detail
