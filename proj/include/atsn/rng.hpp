#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace atsn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Every random draw in the artifact flows from one root seed. Each consumer
// owns a stream id (plus an optional salt, e.g. an epoch index) so stages
// stay decoupled and individually reproducible.
enum class SeedStream : std::uint64_t {
  Synthetic = 1,
  Folds = 2,
  TestSplit = 3,
  EncoderInit = 4,
  Pretrain = 5,
  FineTune = 6,
  MlpInit = 7,
  MlpTrain = 8,
  Dropout = 9,
  Subsample = 10,
  HeadInit = 11,
};

inline std::uint64_t derive_seed(std::uint64_t root, SeedStream stream, std::uint64_t salt = 0) {
  std::uint64_t x = splitmix64(root ^ (0x5eedull + static_cast<std::uint64_t>(stream)));
  return splitmix64(x + salt * 0x9e3779b97f4a7c15ull);
}

// mt19937_64 raw output is pinned by the standard; the distributions below
// are implemented here because the std ones are implementation-defined and
// would break byte-identical reruns.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Box-Muller standard normal.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n); n must be positive.
  std::size_t uniform_int(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_int(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Identity permutation of size n, shuffled in place.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  return idx;
}

}  // namespace atsn
