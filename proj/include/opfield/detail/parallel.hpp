#ifndef OPFIELD_DETAIL_PARALLEL_HPP
#define OPFIELD_DETAIL_PARALLEL_HPP

#include <algorithm>
#include <thread>
#include <vector>

#include "opfield/core.hpp"

namespace opfield::detail {

/// Runs fn(begin, end) over contiguous chunks of [0, n). Each index is visited
/// by exactly one call; callers write to disjoint outputs and reduce afterwards
/// in index order.
template <typename Fn>
void parallel_chunks(Index n, Fn&& fn) {
  const Index workers = std::min<Index>(static_cast<Index>(thread_count()), n);
  if (workers <= 1) {
    if (n > 0) fn(Index{0}, n);
    return;
  }
  const Index chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (Index w = 0; w < workers; ++w) {
    const Index begin = w * chunk;
    const Index end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace opfield::detail

#endif  // OPFIELD_DETAIL_PARALLEL_HPP
