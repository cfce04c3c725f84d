#pragma once

#include "sgdlab/types.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sgdlab {

/// Calls body(i) for i in [0, count) on up to `jobs` threads, in contiguous
/// blocks. The first exception thrown by any worker is rethrown on the caller.
template <typename Body>
void parallel_for(Index count, int jobs, Body&& body) {
  const Index workers = std::clamp<Index>(jobs, 1, std::max<Index>(count, 1));
  if (workers == 1) {
    for (Index i = 0; i < count; ++i) {
      body(i);
    }
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  const Index block = (count + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    const Index begin = w * block;
    const Index end = std::min(count, begin + block);
    threads.emplace_back([&, begin, end] {
      try {
        for (Index i = begin; i < end; ++i) {
          body(i);
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) {
    t.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

}  // namespace sgdlab
