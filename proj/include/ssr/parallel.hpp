#pragma once

#include "ssr/core.hpp"

#include <thread>
#include <vector>

namespace ssr {

/// Run fn(begin, end) over a fixed partition of [0, n). Each index is
/// processed by exactly one worker with the same per-index arithmetic
/// regardless of the thread count, so results are bit-identical for any
/// `threads` as long as workers write disjoint outputs.
template <typename Fn>
void parallel_for_chunks(Index n, int threads, Fn&& fn) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    fn(Index(0), n);
    return;
  }
  const Index workers = std::min<Index>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const Index chunk = (n + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    const Index begin = w * chunk;
    const Index end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ssr
