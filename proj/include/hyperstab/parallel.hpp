#pragma once

#include <cstddef>
#include <functional>

namespace hyperstab {

/// Worker count used by parallel_for. Zero selects the hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index is
/// visited exactly once; bodies must only write to index-owned slots so
/// results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hyperstab
