#pragma once

#include <cstddef>
#include <functional>

namespace qpe {

// Worker count: QPE_THREADS if set (>= 1), else hardware concurrency.
int thread_count();

// Runs body(i) for i in [begin, end) split into contiguous chunks.
void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& body);

}  // namespace qpe
