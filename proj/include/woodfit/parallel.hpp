#pragma once

#include <cstddef>
#include <functional>

namespace woodfit {

/// Number of worker threads used by parallel_for. Defaults to the hardware
/// concurrency. Results never depend on this value: every parallel loop writes
/// into per-index slots that are reduced sequentially by the caller.
void set_worker_count(int workers);
int worker_count();

/// Runs body(i) for i in [0, n). Indices are claimed dynamically.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace woodfit
