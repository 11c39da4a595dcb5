#pragma once

#include <cstddef>
#include <functional>

namespace lqrl {

/// Worker count from LQRL_WORKERS, else the hardware concurrency (at least 1).
int worker_count();

/// Runs fn(0) .. fn(count-1) on the worker pool. Results must be written to
/// per-index slots; the call order is unspecified. Nested calls from inside a
/// worker run inline. If any call throws, the exception of the lowest failing
/// index is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace lqrl
