#pragma once

#include <cstddef>
#include <functional>

namespace boundtail {

/// Worker cap used by every parallel loop. Zero means hardware concurrency.
void set_thread_count(unsigned n) noexcept;
unsigned thread_count() noexcept;

/// Runs body(begin, end) over contiguous, statically assigned chunks of [0, n).
/// Chunk boundaries depend only on n and the thread count, so any reduction
/// the caller performs per chunk in chunk order is reproducible.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace boundtail
