#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace stereorisk {

// Effective worker count: a positive request wins, otherwise the
// STEREO_RISK_THREADS environment variable, otherwise the hardware count.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("STEREO_RISK_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(row_begin, row_end) over contiguous row blocks. Blocks are fixed
// by the thread count alone, so per-pixel outputs land in identical slots
// regardless of scheduling.
inline void parallel_rows(int rows, int threads,
                          const std::function<void(int, int)>& fn) {
  threads = std::clamp(threads, 1, std::max(rows, 1));
  if (threads == 1 || rows <= 1) {
    fn(0, rows);
    return;
  }
  const int block = (rows + threads - 1) / threads;
  std::vector<std::thread> workers;
  std::exception_ptr error;
  std::mutex error_mutex;
  workers.reserve(static_cast<std::size_t>(threads) - 1);
  auto run = [&](int lo, int hi) {
    try {
      fn(lo, hi);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  for (int t = 1; t < threads; ++t) {
    const int lo = t * block;
    const int hi = std::min(rows, lo + block);
    if (lo >= hi) break;
    workers.emplace_back(run, lo, hi);
  }
  run(0, std::min(rows, block));
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace stereorisk
