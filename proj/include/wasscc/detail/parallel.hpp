#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace wasscc::detail {

// Worker count: WASSCC_THREADS if set, otherwise sequential.
inline int thread_budget() {
  if (const char* env = std::getenv("WASSCC_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

// Static chunking over [0, n).  Every index runs exactly once and writers
// must target disjoint slots, so the result is identical to the sequential
// order regardless of the thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const int threads = std::min<std::size_t>(thread_budget(), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace wasscc::detail
