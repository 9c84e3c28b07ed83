#pragma once

#include <cstddef>
#include <functional>

namespace cbpfa {

// Global worker count. 0 means "use all hardware threads". Reads the
// CBPFA_THREADS environment variable the first time it is consulted.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [begin, end). Work is split into contiguous chunks;
// output written by index stays deterministic for any thread count.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn,
                  std::size_t grain = 64);

}  // namespace cbpfa
