#pragma once

#include <cstddef>
#include <functional>

namespace zc {

// Default worker count: ZCNAS_WORKERS if set, otherwise 1.
int default_workers();

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
// visited exactly once; results must be written to per-index slots so the
// outcome does not depend on scheduling. The first exception thrown by any
// task is rethrown after all workers join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace zc
