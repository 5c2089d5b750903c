#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace occkit {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

inline std::size_t plan_workers(std::size_t n, int threads) {
  const auto t = static_cast<std::size_t>(resolve_threads(threads));
  return std::min(t, std::max<std::size_t>(n, 1));
}

/// Splits [0, n) into contiguous chunks, one per planned worker, and runs
/// fn(worker, begin, end) on each. Chunk boundaries depend only on n and
/// the thread count, so any per-worker partial results can be merged in
/// worker order for reproducible output. Callers size partial-result
/// storage with plan_workers(n, threads).
template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = plan_workers(n, threads);
  if (workers <= 1) {
    fn(0, std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(w * chunk, n);
    const std::size_t end = std::min(begin + chunk, n);
    pool.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace occkit
