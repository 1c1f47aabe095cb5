#pragma once

#include <cstddef>
#include <functional>

namespace cwm::par {

// Global worker cap, set once from the CLI (--threads). Defaults to 1.
int& thread_count();

// Runs fn(begin, end) over fixed-size chunks of [0, n).  Chunk boundaries do
// not depend on the worker count, and each chunk writes disjoint output, so
// results are bit-identical at any thread count.
void parallel_for(std::ptrdiff_t n,
                  const std::function<void(std::ptrdiff_t, std::ptrdiff_t)>& fn);

// Fixed pairwise-tree reduction; summation order is independent of worker
// count and of chunking.
double pairwise_sum(const double* data, std::ptrdiff_t n);

}  // namespace cwm::par
