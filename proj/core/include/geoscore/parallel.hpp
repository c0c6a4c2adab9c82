#pragma once

#include <cstddef>
#include <functional>

namespace geoscore {

// Worker cap: min(hardware threads, GEOSCORE_THREADS if set).
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Results must be written to per-index slots;
// scheduling order is unspecified, so outputs must not depend on it.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace geoscore
