#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace fracture {

// Runs fn(i, worker) for i in [0, n) on contiguous blocks; rethrows the first worker exception.
template <class Fn>
void parallel_for(long n, int threads, Fn&& fn) {
  int w = std::max(1, std::min<int>(threads, static_cast<int>(std::max(1L, n))));
  if (w == 1) {
    for (long i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> pool;
  for (int k = 0; k < w; ++k) {
    long lo = n * k / w, hi = n * (k + 1) / w;
    pool.emplace_back([&, k, lo, hi] {
      try {
        for (long i = lo; i < hi; ++i) fn(i, k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace fracture
