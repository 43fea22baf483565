#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace refbench {

// Runs fn(i) for every i in [0, n) on up to `width` threads. fn must not let
// exceptions escape (capture into per-slot state instead); results written to
// distinct slots keep the overall outcome independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int width, Fn&& fn) {
  if (n == 0) return;
  int w = std::max(1, std::min(width, static_cast<int>(n)));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace refbench
