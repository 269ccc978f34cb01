#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace riesz {

inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};
  return n;
}

// 0 means "use the available parallelism".
inline void set_num_threads(int n) { thread_setting().store(std::max(0, n)); }

inline int num_threads() {
  int n = thread_setting().load();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(i) for i in [0, count). Each index is handled by exactly one
// worker; callers write results into per-index slots and reduce in index
// order, so the outcome does not depend on the thread count.
template <class Body>
void parallel_for(int count, Body&& body) {
  int workers = std::min(num_threads(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto run = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace riesz
