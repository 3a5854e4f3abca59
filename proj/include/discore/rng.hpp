#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "discore/errors.hpp"

namespace discore {

// splitmix64 finalizer; used to derive decorrelated per-stream seeds from a
// named root seed so that every consumer owns an independent generator.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t root, uint64_t stream) {
  return mix64(root ^ mix64(stream + 0x51ull));
}

// Deterministic RNG: mt19937_64 (standardized sequence) plus hand-rolled
// categorical/Poisson draws so sampling is bitwise reproducible across
// platforms; std::discrete_distribution and friends are implementation
// defined and must not be used anywhere in this codebase.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t raw() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Unbiased integer in [0, n) by rejection from the top of the 64-bit range
  // (at most one extra draw in expectation for any n).
  uint64_t bounded(uint64_t n) {
    if (n == 0) throw ConfigError("Rng::bounded: empty range");
    const uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const uint64_t r = gen_();
      if (r >= threshold) return r % n;
    }
  }

  // Index drawn from a probability row by linear CDF scan. The row is assumed
  // normalized; rounding slack is absorbed by the final bucket.
  int categorical(const double* p, int n) {
    double u = uniform();
    double acc = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      acc += p[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

  // Poisson by Knuth's exponential-product inversion. exp(-mean) underflows
  // for mean beyond ~700, so large means are split using Poisson additivity;
  // the sampler's guard caps mean at 1e3 anyway.
  long poisson(double mean) {
    if (!(mean >= 0.0)) throw NumericError("poisson: mean must be >= 0");
    long n = 0;
    while (mean > 500.0) {
      n += poisson_small(500.0);
      mean -= 500.0;
    }
    return n + poisson_small(mean);
  }

 private:
  long poisson_small(double mean) {
    if (mean == 0.0) return 0;
    const double limit = std::exp(-mean);
    long k = 0;
    double prod = 1.0;
    do {
      ++k;
      prod *= uniform();
    } while (prod > limit);
    return k - 1;
  }

  std::mt19937_64 gen_;
};

}  // namespace discore
