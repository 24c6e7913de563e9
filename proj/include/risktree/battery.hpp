#ifndef RISKTREE_BATTERY_HPP_
#define RISKTREE_BATTERY_HPP_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "risktree/tree.hpp"

namespace risktree {

/// n positions with leaf values uniform in [lo, hi], reproducible from `seed`.
std::vector<RandomVariable> random_battery(const FilteredSpace& space, std::size_t n, std::uint64_t seed,
                                           double lo = -1.0, double hi = 1.0);

/// The constants -1, 0 and 1 followed by n random positions in [-1, 1].
std::vector<RandomVariable> standard_battery(const FilteredSpace& space, std::size_t n, std::uint64_t seed);

/// E_P[X | F_u] as a leaf vector.
RandomVariable project(const FilteredSpace& space, const RandomVariable& x, int u);

/// Runs f(i) for i in [0, n) on `jobs` threads. Callers write results into
/// per-index slots so the outcome does not depend on scheduling.
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace risktree

#endif  // RISKTREE_BATTERY_HPP_
