#pragma once

#include <cstddef>
#include <functional>

namespace flowsync {

/// Worker cap: FLOWSYNC_THREADS if set (>= 1), otherwise the hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) over up to worker_count() threads. Each index is
/// processed exactly once; callers write results into per-index slots, so the
/// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace flowsync
