#pragma once

#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace xavt::detail {

// Worker-thread cap from XAVT_THREADS (default 1 for reproducibility).
inline int worker_threads() {
  static int cached = [] {
    const char* env = std::getenv("XAVT_THREADS");
    if (!env) return 1;
    int n = std::atoi(env);
    if (n < 1) return 1;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw > 0 && n > static_cast<int>(hw)) n = static_cast<int>(hw);
    return n;
  }();
  return cached;
}

// Runs fn(i) for i in [0, n). Work items write disjoint outputs, so results
// are bitwise identical for every thread count.
template <class F>
void parallel_for(int64_t n, F&& fn) {
  int threads = worker_threads();
  if (threads <= 1 || n <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (threads > n) threads = static_cast<int>(n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int64_t i = w; i < n; i += threads) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace xavt::detail
