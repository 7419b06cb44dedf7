#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace darslab {

// Thin fork-join helper. Callers write results into per-index slots and do
// any reduction afterwards in index order, so every derived number is
// identical for any worker count. Worker lambdas must not throw; error
// states go into slots and are inspected after the join.
class Parallel {
 public:
  explicit Parallel(int threads = 1) {
    if (threads < 1) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads_ = std::max(threads, 1);
  }

  int threads() const { return threads_; }

  template <typename F>
  void for_each(std::size_t n, F&& f) const {
    if (n == 0) return;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads_), n);
    if (workers <= 1) {
      for (std::size_t i = 0; i < n; ++i) f(i);
      return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = n * w / workers;
      const std::size_t hi = n * (w + 1) / workers;
      pool.emplace_back([lo, hi, &f] {
        for (std::size_t i = lo; i < hi; ++i) f(i);
      });
    }
    for (auto& t : pool) t.join();
  }

 private:
  int threads_ = 1;
};

}  // namespace darslab
