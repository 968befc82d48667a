#include "kcs/parallel.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace kcs {

int chunk_count(std::size_t n, int threads) {
  if (n == 0) return 1;
  return static_cast<int>(std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, n));
}

void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t, int)>& body) {
  const int chunks = chunk_count(n, threads);
  if (chunks == 1) {
    body(0, n, 0);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(chunks - 1);
  const auto bounds = [&](int c) { return n * static_cast<std::size_t>(c) / chunks; };
  for (int c = 1; c < chunks; ++c) {
    workers.emplace_back([&, c] { body(bounds(c), bounds(c + 1), c); });
  }
  body(0, bounds(1), 0);
}

}  // namespace kcs
