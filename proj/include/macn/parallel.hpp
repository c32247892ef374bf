#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cstring>
#include <thread>
#include <vector>

#include "macn/model.hpp"

namespace macn {

// True when MACN_DETERMINISTIC=1; every parallel section then runs on one thread.
inline bool deterministic_mode() {
  const char* v = std::getenv("MACN_DETERMINISTIC");
  return v != nullptr && std::strcmp(v, "1") == 0;
}

inline int effective_jobs(int requested) {
  if (deterministic_mode()) return 1;
  if (requested <= 0) return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return requested;
}

// Calls fn(model, i) for i in [0, n); each worker thread gets its own deep
// copy of the model. Results must be written to per-index slots.
template <class Fn>
void parallel_over(const Model& model, std::size_t n, int jobs, Fn fn) {
  const int threads = std::max(1, std::min<int>(effective_jobs(jobs), static_cast<int>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(model, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      const Model local = model.clone();
      for (std::size_t i = next++; i < n; i = next++) fn(local, i);
    });
  }
}

}  // namespace macn
