#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <thread>
#include <vector>

namespace hring {

/// Runs body(i) for i in [0, count) on `threads` workers with static,
/// contiguous chunks. Each index is visited exactly once.
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads > 0 ? threads : 1, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Minimum of f(i) over [0, count) with the smallest index winning ties, so
/// the result does not depend on the worker count.
struct ArgMin {
  double value = std::numeric_limits<double>::infinity();
  std::size_t index = 0;
};

template <class F>
ArgMin parallel_argmin(std::size_t count, int threads, F&& f) {
  std::vector<double> vals(count);
  parallel_for(count, threads, [&](std::size_t i) { vals[i] = f(i); });
  ArgMin best;
  for (std::size_t i = 0; i < count; ++i)
    if (vals[i] < best.value) best = {vals[i], i};
  return best;
}

}  // namespace hring
