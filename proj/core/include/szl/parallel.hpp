#pragma once

#include <functional>

namespace szl {

// Thread count from SZL_THREADS, falling back to the hardware concurrency.
int default_threads();

// Runs fn(block) for block in [0, blocks). The partition into blocks is fixed
// by the caller, so reductions combined in block order are reproducible for
// any thread count.
void parallel_blocks(int blocks, int threads, const std::function<void(int)>& fn);

}  // namespace szl
