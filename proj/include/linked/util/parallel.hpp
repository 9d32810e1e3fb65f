#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace linked::util {

// Runs fn(i) for i in [0, count) on at most `limit` threads. Every index
// runs even if an earlier one throws; the first exception (lowest index) is
// rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t limit, Fn&& fn) {
  if (count == 0) return;
  const std::size_t workers = std::clamp<std::size_t>(limit, 1, count);
  if (workers == 1) {
    std::exception_ptr first;
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        if (!first) first = std::current_exception();
      }
    }
    if (first) std::rethrow_exception(first);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr first;
  std::size_t first_index = count;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (i < first_index) {
              first_index = i;
              first = std::current_exception();
            }
          }
        }
      });
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace linked::util
