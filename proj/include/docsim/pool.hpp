#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace docsim {

// Partition-parallel execution. Partition boundaries are a function of the
// item count alone (fixed chunk size), never of the worker count, and
// per-partition results are always combined in partition order. Any value
// computed this way is bitwise identical no matter how many workers run.
inline constexpr size_t kDefaultChunk = 512;

struct Partitioner {
  size_t count = 0;
  size_t chunk = kDefaultChunk;

  size_t parts() const {
    if (count == 0) return 0;
    return (count + chunk - 1) / chunk;
  }
  size_t lo(size_t part) const { return part * chunk; }
  size_t hi(size_t part) const {
    const size_t h = (part + 1) * chunk;
    return h < count ? h : count;
  }
};

// Runs fn(part, lo, hi) over all partitions using up to `workers` threads.
// With workers <= 1 everything runs inline on the calling thread.
inline void parallel_partitions(size_t count, unsigned workers,
                                const std::function<void(size_t, size_t, size_t)>& fn,
                                size_t chunk = kDefaultChunk) {
  Partitioner parts{count, chunk};
  const size_t n_parts = parts.parts();
  if (n_parts == 0) return;

  if (workers <= 1 || n_parts == 1) {
    for (size_t p = 0; p < n_parts; ++p) fn(p, parts.lo(p), parts.hi(p));
    return;
  }

  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&] {
    for (;;) {
      const size_t p = next.fetch_add(1);
      if (p >= n_parts || failed.load()) return;
      try {
        fn(p, parts.lo(p), parts.hi(p));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  const unsigned n_threads =
      static_cast<unsigned>(std::min<size_t>(workers, n_parts));
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (unsigned t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Maps partitions to values; the result vector is indexed by partition, so a
// sequential fold over it reduces in a fixed order regardless of scheduling.
template <typename R>
std::vector<R> map_partitions(size_t count, unsigned workers,
                              const std::function<R(size_t, size_t, size_t)>& fn,
                              size_t chunk = kDefaultChunk) {
  Partitioner parts{count, chunk};
  std::vector<R> results(parts.parts());
  parallel_partitions(
      count, workers,
      [&](size_t p, size_t lo, size_t hi) { results[p] = fn(p, lo, hi); },
      chunk);
  return results;
}

}  // namespace docsim
