#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace sedctrl {

// SplitMix64 step; used to derive independent sub-stream seeds from one root
// seed so that results do not depend on worker count or scheduling.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d649bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
  return splitmix64(s);
}

// Thin deterministic wrapper around mt19937_64.  Variates are produced with
// explicit transforms (not std::*_distribution) so streams are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return (gen_() >> 11) * 0x1.0p-53; }

  // Exponential with the given rate; rate <= 0 means "never" (+infinity).
  double exponential(double rate) {
    if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
    return -std::log1p(-uniform()) / rate;
  }

  // Index k with probability weights[k] / total (total = sum of weights > 0).
  int choose(const double* weights, int n, double total) {
    double u = uniform() * total;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      acc += weights[k];
      if (u < acc) return k;
    }
    return n - 1;  // guard against rounding at the top end
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace sedctrl
