#pragma once

#include <cstddef>
#include <functional>

namespace partcom {

// Worker count: PARTCOM_THREADS if set (>=1), else hardware concurrency.
std::size_t worker_count();

// Splits [0, n) into contiguous chunks and runs `fn(begin, end)` on the
// worker pool. Chunks are disjoint, so writes to disjoint output ranges are
// race-free and the result is bitwise independent of the worker count.
// Falls back to a single direct call when n is small or one worker is
// available.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace partcom
