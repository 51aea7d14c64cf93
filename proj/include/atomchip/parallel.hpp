#pragma once

#include <cstddef>
#include <functional>

namespace atomchip {

/// Worker count: ATOMCHIP_THREADS if set and positive, otherwise the hardware
/// concurrency (at least 1).
int default_thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers in contiguous blocks.
/// Each index is processed exactly once and results must only be written to
/// per-index storage, so the outcome does not depend on the worker count.
/// The first exception thrown by any worker is rethrown after all join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0);

}  // namespace atomchip
