#pragma once

#include <cstddef>
#include <functional>

namespace artikin {

/// Upper bound on worker threads used by internal fan-outs. 0 means
/// hardware concurrency.
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs body(i) for i in [0, n). Work items must write disjoint outputs;
/// results never depend on the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace artikin
