#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

#include "cin/common.hpp"

namespace cin {

// Worker cap: CIN_THREADS if set, else 1. Parallel sections always partition
// work statically and reduce in index order, so results are identical for any
// worker count.
inline int worker_count() {
  static const int n = [] {
    const char* env = std::getenv("CIN_THREADS");
    if (!env) return 1;
    int v = std::atoi(env);
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    return std::clamp(v, 1, hw);
  }();
  return n;
}

template <typename F>
void parallel_for(Index n, F&& body) {
  const int workers = std::min<Index>(worker_count(), n);
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([=, &body] {
      for (Index i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace cin
