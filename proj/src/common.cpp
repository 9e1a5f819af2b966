#include "atsn/common.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace atsn {

namespace {

int default_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  return std::clamp<int>(static_cast<int>(hw), 1, 16);
}

std::atomic<int> g_threads{0};

}  // namespace

int thread_count() {
  int t = g_threads.load(std::memory_order_relaxed);
  return t > 0 ? t : default_threads();
}

void set_thread_count(int n) { g_threads.store(n, std::memory_order_relaxed); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t t = static_cast<std::size_t>(thread_count());
  if (n == 0) return;
  if (t <= 1 || n < 2) {
    fn(0, n);
    return;
  }
  const std::size_t workers = std::min(t, n);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const auto chunk = [&](std::size_t w) {
    try {
      const std::size_t begin = n * w / workers;
      const std::size_t end = n * (w + 1) / workers;
      if (begin < end) fn(begin, end);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(chunk, w);
  chunk(0);
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace atsn
