#ifndef MASKDIFF_RNG_HPP
#define MASKDIFF_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

namespace maskdiff {

// SplitMix64 step, used for seeding and for keyed hashing.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic xoshiro256++ generator.  Hand-rolled distributions keep
// every draw reproducible independent of the standard library build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  // Independent stream for one chain of a multi-chain run.
  static Rng for_chain(std::uint64_t master_seed, std::uint64_t chain) {
    std::uint64_t sm = master_seed ^ 0x6a09e667f3bcc909ULL;
    std::uint64_t a = splitmix64(sm);
    sm = a + chain * 0x9e3779b97f4a7c15ULL;
    return Rng(splitmix64(sm));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in (0, 1], safe as a log argument.
  double uniform_pos() { return 1.0 - uniform(); }

  // Standard normal via Box-Muller; one fresh pair per call.
  double normal() {
    const double u = uniform_pos();
    const double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
  }

  // Poisson draw by Knuth's product method; large means are split so the
  // running product never underflows.
  long poisson(double mean) {
    long total = 0;
    while (mean > 500.0) {
      total += poisson_small(500.0);
      mean -= 500.0;
    }
    return total + poisson_small(mean);
  }

  // Index draw proportional to `weights` (nonnegative, not all zero).
  std::size_t categorical(const std::vector<double>& weights, double weight_sum) {
    const double u = uniform() * weight_sum;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  long poisson_small(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    long k = 0;
    double prod = 1.0;
    do {
      ++k;
      prod *= uniform_pos();
    } while (prod > limit);
    return k - 1;
  }

  std::uint64_t state_[4];
};

// Standard normal keyed by an arbitrary tuple of integers; deterministic
// across replays.  Used by the perturbed score oracle.
inline double keyed_normal(std::uint64_t k0, std::uint64_t k1, std::uint64_t k2,
                           std::uint64_t k3) {
  std::uint64_t sm = 0x243f6a8885a308d3ULL;
  sm ^= splitmix64(sm) ^ k0;
  sm ^= splitmix64(sm) ^ k1;
  sm ^= splitmix64(sm) ^ k2;
  sm ^= splitmix64(sm) ^ k3;
  const double u =
      1.0 - static_cast<double>(splitmix64(sm) >> 11) * 0x1.0p-53;
  const double v = static_cast<double>(splitmix64(sm) >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
}

}  // namespace maskdiff

#endif  // MASKDIFF_RNG_HPP
