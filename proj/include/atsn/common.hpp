#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace atsn {

// Error taxonomy; the CLI maps these onto exit codes (usage 1, data 2,
// numeric 3).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Worker count used by parallel_for. 0 resets to the hardware default.
int thread_count();
void set_thread_count(int n);

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks are disjoint,
// so any routine whose writes are per-index produces bit-identical output
// for every thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace atsn
