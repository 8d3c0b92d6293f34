#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace shortint {

/// Worker count for a computation. Results never depend on it: work is split
/// into chunks whose boundaries are fixed by the problem size alone, and
/// partial results are merged in chunk order by the caller.
struct Threads {
  unsigned count = 1;

  static Threads hardware() {
    return {std::max(1u, std::thread::hardware_concurrency())};
  }
};

/// Runs body(chunk) for chunk in [0, num_chunks). Chunks are claimed
/// dynamically; the first exception thrown by any chunk is rethrown.
inline void parallel_chunks(std::size_t num_chunks, Threads threads,
                            const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, threads.count), num_chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < num_chunks; ++c) body(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= num_chunks) return;
      try {
        body(c);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(num_chunks);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Fixed partition of [begin, end) into pieces of at most chunk_size.
struct ChunkPlan {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  std::uint64_t chunk_size = 1;

  std::size_t count() const {
    if (end <= begin) return 0;
    return static_cast<std::size_t>((end - begin + chunk_size - 1) / chunk_size);
  }
  std::uint64_t lo(std::size_t c) const { return begin + c * chunk_size; }
  std::uint64_t hi(std::size_t c) const {
    return std::min(end, begin + (c + 1) * chunk_size);
  }
};

/// Evaluates fn(lo, hi) on every chunk of plan and returns the results in
/// chunk order.
template <class Result, class Fn>
std::vector<Result> map_chunks(const ChunkPlan& plan, Threads threads, Fn&& fn) {
  std::vector<Result> out(plan.count());
  parallel_chunks(plan.count(), threads,
                  [&](std::size_t c) { out[c] = fn(plan.lo(c), plan.hi(c)); });
  return out;
}

}  // namespace shortint
