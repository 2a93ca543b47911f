#pragma once

#include <algorithm>
#include <cstddef>
#include <future>
#include <vector>

namespace gig {

// Runs fn(i) for i in [0, n) over `workers` threads in contiguous chunks.
// fn must only write to slots it owns; exceptions propagate to the caller.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t chunks = std::min<std::size_t>(workers, n);
  std::vector<std::future<void>> jobs;
  jobs.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    std::size_t lo = n * c / chunks;
    std::size_t hi = n * (c + 1) / chunks;
    jobs.push_back(std::async(std::launch::async, [lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    }));
  }
  for (auto& j : jobs) j.get();
}

}  // namespace gig
