#pragma once

#include <cstddef>
#include <functional>

namespace smrkit {

// Runs fn(i) for i in [0, n) across up to `workers` threads with static
// chunking. Callers write results into preallocated per-index slots, so the
// outcome is identical for any worker count.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace smrkit
