#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace dsa {

// splitmix64; used for seed mixing and stream derivation only.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seeded random stream. All draws are derived from explicit 64-bit seeds so
// that runs are reproducible bit-for-bit; distribution sampling is hand-rolled
// rather than delegated to implementation-defined std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

  // Independent child stream; tags keep substreams decorrelated.
  static Rng derive(std::uint64_t seed, std::uint64_t tag) {
    return Rng(mix64(seed ^ mix64(tag + 0x51ed270b81f0c6a3ULL)));
  }
  static Rng derive(std::uint64_t seed, std::uint64_t tag1, std::uint64_t tag2) {
    return Rng(mix64(mix64(seed ^ mix64(tag1 + 0x51ed270b81f0c6a3ULL)) + tag2));
  }

  std::uint64_t u64() { return gen_(); }

  // Uniform in [0,1) with 53-bit resolution.
  double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform in (0,1); safe as a log() argument.
  double u01_open() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return u01() < p; }

  // Uniform integer in [0, n); rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t lim = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do { x = gen_(); } while (x >= lim);
    return x % n;
  }

  // Standard normal via Box-Muller (cosine branch).
  double normal() {
    const double r = std::sqrt(-2.0 * std::log(u01_open()));
    return r * std::cos(2.0 * std::numbers::pi * u01());
  }

  // Circularly-symmetric complex Gaussian CN(0, variance).
  std::complex<double> cnormal(double variance) {
    const double r = std::sqrt(-variance * std::log(u01_open()));
    const double phi = 2.0 * std::numbers::pi * u01();
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

  // Uniformly random k-subset of {0,...,n-1}, sorted ascending.
  std::vector<int> subset(int n, int k) {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int i = 0; i < k; ++i)
      std::swap(pool[i], pool[i + static_cast<int>(below(n - i))]);
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace dsa
