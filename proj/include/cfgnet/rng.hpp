#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cfgnet {

// Seeded generator with a fixed bit-to-double mapping so that identical seeds
// give identical streams on every platform (mt19937_64 output is pinned by the
// standard, std::uniform_real_distribution and std::shuffle are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform double in [lo, hi) from the top 53 bits.
  double uniform(double lo, double hi) {
    const double unit = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return lo + unit * (hi - lo);
  }

  // Uniform index in [0, n). n must be positive.
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  // Fisher-Yates, back to front.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cfgnet
