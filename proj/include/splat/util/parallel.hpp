#pragma once

#include <cstddef>
#include <functional>

namespace splat {

// Static block partition of [0, n) over `threads` workers (0 = hardware
// concurrency). The partition depends only on n and the resolved thread
// count, never on scheduling, so disjoint-write kernels stay deterministic.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn);

int resolve_threads(int threads);

}  // namespace splat
