#pragma once

#include <cstddef>
#include <functional>

namespace xtrack {

// Worker cap: XTRACK_THREADS when set (clamped to >= 1), otherwise the
// hardware concurrency.
int thread_budget();

// Runs body(i) for i in [0, n) across up to thread_budget() workers with a
// static partition. Each index runs exactly once; callers get determinism by
// writing to per-index slots. Exceptions propagate to the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace xtrack
