#pragma once

#include <cstddef>
#include <functional>

namespace kcs {

/// Runs body(begin, end, chunk) over `threads` contiguous chunks of [0, n).
/// Chunk boundaries depend only on (n, threads).
void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t, int)>& body);

/// Number of chunks parallel_chunks will use for (n, threads).
int chunk_count(std::size_t n, int threads);

}  // namespace kcs
