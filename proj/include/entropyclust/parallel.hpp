#pragma once

#include <cstddef>
#include <functional>

namespace entropyclust {

// Worker cap shared by the GA and the sweep. 0 means hardware concurrency.
void set_thread_limit(std::size_t n);
std::size_t thread_limit();

// Runs body(i) for i in [0, n). Each index is written by exactly one call, so
// results stored by index are independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace entropyclust
