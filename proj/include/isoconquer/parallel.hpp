#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace isoconquer {

/// Runs body(i) for i in [0, count) on up to `workers` threads. Work items
/// are claimed dynamically; callers write results by index so the outcome
/// never depends on the schedule. The first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
  const unsigned width = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
  if (width <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count, std::memory_order_relaxed);
        return;
      }
    }
  };
  {
    std::vector<std::jthread> threads;
    threads.reserve(width);
    for (unsigned w = 0; w < width; ++w) threads.emplace_back(run);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace isoconquer
