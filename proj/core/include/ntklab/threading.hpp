#pragma once

#include <cstddef>
#include <functional>

namespace ntklab {

// Worker count used by row-parallel loops. Resolution order: set_thread_count(),
// the NTKLAB_THREADS environment variable, hardware concurrency.
// Numerical results never depend on this value: parallel loops write disjoint
// rows and every reduction runs sequentially in a fixed order.
int thread_count();

// n < 1 drops back to the environment/hardware default.
void set_thread_count(int n);

// Runs body(begin, end) over a static partition of [0, n) into contiguous chunks,
// at most thread_count() of them. With one worker the call is inline.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace ntklab
