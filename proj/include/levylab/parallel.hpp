#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace levylab {

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls `body(begin, end)` over contiguous chunks of [0, n) from a pool of
/// worker threads. Each chunk is handled by exactly one thread, so state created
/// inside `body` is thread-confined. The first exception thrown by any chunk is
/// rethrown on the calling thread after all workers have joined.
template <typename Body>
void parallel_for_chunks(std::size_t n, unsigned threads, Body&& body, std::size_t chunk = 0) {
  if (n == 0) return;
  threads = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), n));
  if (chunk == 0) chunk = std::max<std::size_t>(1, n / (8 * static_cast<std::size_t>(threads)));
  if (threads == 1) {
    for (std::size_t begin = 0; begin < n; begin += chunk) body(begin, std::min(n, begin + chunk));
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t begin = next.fetch_add(chunk);
      if (begin >= n) return;
      try {
        body(begin, std::min(n, begin + chunk));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  parallel_for_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) body(i);
  });
}

}  // namespace levylab
