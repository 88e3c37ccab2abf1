#ifndef LIPS_PARALLEL_HPP
#define LIPS_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lips {

// Worker cap shared by everything that calls parallel_for.
int num_threads();
void set_num_threads(int n);

// set inside workers so nested parallel_for calls run inline
inline thread_local bool in_parallel_region = false;

// Runs f(k) for k in [0, n) on static contiguous chunks. f must only write to
// per-k outputs; the result is then independent of the thread count.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(num_threads()), n);
  if (nt <= 1 || in_parallel_region) {
    for (std::size_t k = 0; k < n; ++k) f(k);
    return;
  }
  std::vector<std::exception_ptr> errs(nt);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (std::size_t w = 0; w < nt; ++w) {
    pool.emplace_back([&, w] {
      std::size_t lo = n * w / nt, hi = n * (w + 1) / nt;
      in_parallel_region = true;
      try {
        for (std::size_t k = lo; k < hi; ++k) f(k);
      } catch (...) {
        errs[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

}  // namespace lips

#endif
