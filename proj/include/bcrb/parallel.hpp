#pragma once

#include <cstddef>
#include <functional>

namespace bcrb {

/// Worker count: BCRB_THREADS when set to a positive integer, else the hardware concurrency.
unsigned worker_count();

/// Calls body(i) for i in [0, count) on up to worker_count() threads.  Each
/// index is visited exactly once; the first exception thrown is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace bcrb
