#pragma once

// Shared-memory helpers. DISPERSIVE_MODES_THREADS caps the worker count;
// 0 or unset means one worker per hardware thread.

#include <cstdlib>
#include <thread>
#include <vector>

namespace dmodes {

inline unsigned worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const char* env = std::getenv("DISPERSIVE_MODES_THREADS");
  if (env == nullptr || *env == '\0') return hw;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (end == env || v <= 0) return hw;
  return static_cast<unsigned>(v);
}

// Runs fn(i) for i in [0, n). The partition is static and each index is
// written by exactly one worker, so results never depend on thread count.
// fn must not throw; callers record per-index failure states instead.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  unsigned workers = worker_count();
  if (workers > n) workers = static_cast<unsigned>(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&fn, w, n, workers] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace dmodes
