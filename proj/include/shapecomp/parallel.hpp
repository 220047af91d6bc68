#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace shapecomp {

namespace detail {
inline std::atomic<int>& worker_setting() {
  static std::atomic<int> n{1};
  return n;
}
}  // namespace detail

/// Number of threads used by data-parallel loops. Results never depend on it:
/// work is split into fixed-size chunks and per-chunk partials are combined
/// in chunk order.
inline void set_worker_count(int n) { detail::worker_setting() = std::max(1, n); }
inline int worker_count() { return detail::worker_setting(); }

/// Runs fn(chunk_id, begin, end) over [0, n) split into chunks of
/// `chunk` items. The chunk layout depends only on n and chunk.
template <class Fn>
void for_each_chunk(std::size_t n, std::size_t chunk, Fn&& fn) {
  if (n == 0) return;
  chunk = std::max<std::size_t>(chunk, 1);
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  const int workers = static_cast<int>(std::min<std::size_t>(worker_count(), n_chunks));
  auto run = [&](std::size_t c) { fn(c, c * chunk, std::min(n, (c + 1) * chunk)); };
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < n_chunks; c = next++) run(c);
    });
  for (auto& t : pool) t.join();
}

inline std::size_t chunk_count(std::size_t n, std::size_t chunk) {
  return n == 0 ? 0 : (n + chunk - 1) / chunk;
}

/// Deterministic sum of f(i), i in [0, n): chunk partials, then a fixed-order
/// pairwise combine.
template <class F>
double ordered_sum(std::size_t n, F&& f, std::size_t chunk = 4096) {
  std::vector<double> partial(chunk_count(n, chunk), 0.0);
  for_each_chunk(n, chunk, [&](std::size_t c, std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += f(i);
    partial[c] = s;
  });
  while (partial.size() > 1) {
    std::vector<double> next((partial.size() + 1) / 2, 0.0);
    for (std::size_t i = 0; i < next.size(); ++i)
      next[i] = partial[2 * i] + (2 * i + 1 < partial.size() ? partial[2 * i + 1] : 0.0);
    partial.swap(next);
  }
  return partial.empty() ? 0.0 : partial[0];
}

}  // namespace shapecomp
