#pragma once

#include <cstddef>
#include <functional>

namespace mixbps {

/// Worker count: MIXBPS_THREADS when set to a positive integer, otherwise
/// the hardware concurrency.
std::size_t thread_count();

/// Calls body(begin, end) on disjoint chunks of [0, n). Results must not
/// depend on the chunking; callers write into per-index slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

} // namespace mixbps
