#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sdepca {

/// Calls fn(chunk) for every chunk in [0, n_chunks) on up to `threads`
/// workers. Chunks are claimed dynamically, so callers must write results
/// into per-chunk slots and reduce them in chunk order afterwards; that keeps
/// the outcome independent of the worker count. The first exception thrown
/// by any chunk is rethrown after all workers have joined.
template <typename Fn>
void parallel_for_chunks(std::int64_t n_chunks, int threads, Fn&& fn) {
  const int workers = static_cast<int>(std::clamp<std::int64_t>(threads, 1, std::max<std::int64_t>(1, n_chunks)));
  if (workers == 1) {
    for (std::int64_t c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::int64_t c = next++; c < n_chunks; c = next++) {
      try {
        fn(c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_chunks;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace sdepca
