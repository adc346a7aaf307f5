#pragma once

#include <cstddef>
#include <functional>

namespace gddm {

/// Calls body(i) for every i in [0, n) on up to `threads` workers. Indices
/// are handed out in small chunks; the first exception thrown by any worker
/// is rethrown after all workers have stopped.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

/// Number of hardware threads, at least 1.
int hardware_threads();

}  // namespace gddm
