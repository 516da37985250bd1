#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace fracmap {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> value{0};
  return value;
}
}  // namespace detail

/// Worker count for pair sums. 0 (the default) means hardware concurrency.
inline void set_num_threads(int n) { detail::thread_setting().store(std::max(0, n)); }

inline int num_threads() {
  const int configured = detail::thread_setting().load();
  if (configured > 0) return configured;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Rows are always split into blocks of this size, independent of the worker
/// count, so per-row results never depend on scheduling.
inline constexpr std::size_t kRowBlock = 32;

template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t blocks = (count + kRowBlock - 1) / kRowBlock;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(num_threads()), blocks);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t b = next++; b < blocks; b = next++) {
      const std::size_t end = std::min(count, (b + 1) * kRowBlock);
      for (std::size_t i = b * kRowBlock; i < end; ++i) body(i);
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
}

/// Pairwise (tree) summation; the association order depends only on the length.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

/// Sums `row(i)` over i < count. Deterministic mode stores every row and
/// reduces pairwise; otherwise each worker keeps a running sum and partials
/// are combined in completion order.
template <class Row>
double reduce_rows(std::size_t count, Row&& row, bool deterministic) {
  if (deterministic) {
    std::vector<double> values(count);
    parallel_for(count, [&](std::size_t i) { values[i] = row(i); });
    return pairwise_sum(values);
  }
  const std::size_t blocks = (count + kRowBlock - 1) / kRowBlock;
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(num_threads(), blocks));
  std::atomic<std::size_t> next{0};
  std::mutex guard;
  double total = 0.0;
  auto worker = [&] {
    double local = 0.0;
    for (std::size_t b = next++; b < blocks; b = next++) {
      const std::size_t end = std::min(count, (b + 1) * kRowBlock);
      for (std::size_t i = b * kRowBlock; i < end; ++i) local += row(i);
    }
    std::lock_guard lock(guard);
    total += local;
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  return total;
}

}  // namespace fracmap
