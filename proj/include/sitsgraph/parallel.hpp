#pragma once

#include <cstddef>
#include <functional>

namespace sitsgraph {

// Worker cap used by per-date / per-patch stages. 0 means "use the default",
// which is SITSGRAPH_THREADS when set, else the hardware concurrency.
void set_thread_limit(unsigned n) noexcept;
unsigned thread_limit() noexcept;

// Runs fn(i) for i in [0, n). Work items must write to disjoint outputs;
// results are then independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sitsgraph
