// Seeded random generator with documented draw algorithms so that sampled
// splits and synthetic datasets can be reproduced from the seed alone.
//
// Draws:
//   u64       - raw std::mt19937_64 output
//   uniform   - u64 scaled by 2^-64 into [0,1)
//   normal    - Box-Muller on two uniform draws (both normals consumed in
//               order; the spare is cached)
//   index(n)  - u64 modulo n
//   sample_without_replacement - partial Fisher-Yates over the pool using
//               index(n) for each swap
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace jdrdl {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t u64() { return engine_(); }

  double uniform() { return static_cast<double>(u64()) * 0x1.0p-64; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: empty range");
    return static_cast<std::size_t>(u64() % n);
  }

  /// First k entries of a partial Fisher-Yates shuffle of [0, pool_size).
  std::vector<std::size_t> sample_without_replacement(std::size_t pool_size, std::size_t k) {
    if (k > pool_size) {
      throw std::invalid_argument("Rng::sample_without_replacement: k exceeds pool");
    }
    std::vector<std::size_t> pool(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) pool[i] = i;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t pick = j + index(pool_size - j);
      std::swap(pool[j], pool[pick]);
    }
    pool.resize(k);
    return pool;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace jdrdl
