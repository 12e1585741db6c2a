#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace folab {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> value{0};
  return value;
}
}  // namespace detail

/// Sets the worker count used by parallel loops; 0 means "read FOLAB_THREADS,
/// else hardware concurrency".
inline void set_thread_count(int threads) { detail::thread_setting() = std::max(0, threads); }

inline int thread_count() {
  int t = detail::thread_setting();
  if (t > 0) return t;
  if (const char* env = std::getenv("FOLAB_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count). Iterations must write to disjoint
/// outputs; callers reduce afterwards in index order, so results do not
/// depend on the thread count.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = count;
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Pairwise (tree) sum in fixed order.
template <class T>
T tree_sum(const std::vector<T>& values, std::size_t lo, std::size_t hi, T zero) {
  if (hi <= lo) return zero;
  if (hi - lo == 1) return values[lo];
  std::size_t mid = lo + (hi - lo) / 2;
  return tree_sum(values, lo, mid, zero) + tree_sum(values, mid, hi, zero);
}

template <class T>
T tree_sum(const std::vector<T>& values, T zero) {
  return tree_sum(values, 0, values.size(), zero);
}

}  // namespace folab
