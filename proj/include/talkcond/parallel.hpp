#pragma once

#include <cstddef>
#include <functional>

namespace talkcond {

// Worker count used when a caller passes 0.
std::size_t default_workers();

// Runs body(i) for i in [0, n) on up to `workers` threads. Indices are handed
// out dynamically; callers that reduce must write into per-index slots and
// fold them in index order afterwards. Exceptions from the body are rethrown
// on the calling thread (the first one wins).
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace talkcond
