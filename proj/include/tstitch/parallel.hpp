#pragma once

#include <cstddef>
#include <functional>

namespace ts {

/// Worker cap: the TS_THREADS environment variable when set and positive, otherwise the
/// hardware concurrency.
std::size_t max_threads();

/// Runs fn(0..n-1) on up to max_threads() threads. Each index must write only its own output
/// slot so results do not depend on scheduling. The first exception is rethrown. Calls made
/// from inside a worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ts
