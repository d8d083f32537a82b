#pragma once

#include <cstddef>
#include <functional>

namespace tfgw {

/// Worker count: explicit value if positive, else TFGW_THREADS, else hardware concurrency.
int resolve_threads(int requested);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// processed exactly once; callers write results into per-index slots so the
/// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace tfgw
