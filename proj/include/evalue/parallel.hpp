#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace evalue {

namespace detail {

inline int threads_from_env() {
  if (const char* env = std::getenv("EV_THREADS"); env != nullptr) {
    try {
      const int value = std::stoi(env);
      if (value > 0) return value;
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{threads_from_env()};
  return cap;
}

}  // namespace detail

// Upper bound on worker threads used by parallel_for. Initialized from
// EV_THREADS, falling back to the hardware concurrency.
inline int max_threads() { return detail::thread_cap().load(); }

inline void set_max_threads(int threads) {
  detail::thread_cap().store(std::max(1, threads));
}

// Runs body(i) for i in [0, count). Work is split into contiguous blocks, one
// per worker. The first exception thrown by any worker is rethrown on the
// calling thread after all workers have joined.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(max_threads()), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t block = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * block;
    const std::size_t end = std::min(count, begin + block);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

// Pairwise (cascade) summation. The result depends only on the order of the
// input, never on how the caller produced it.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double total = 0.0;
    for (double v : values) total += v;
    return total;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace evalue
