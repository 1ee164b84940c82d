#pragma once

#include <cmath>
#include <cstdint>

namespace fcalc {

// splitmix64 finalizer; the core mixing step of the counter-based generator.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-based splittable generator. A generator is a pure function of
// (key, counter); fork(task) derives an independent stream, so parallel
// sampling keyed by (seed, task-index) is deterministic regardless of
// scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x8f21c5d7a3b49e01ull)) {}

  Rng fork(std::uint64_t task) const {
    Rng r;
    r.key_ = mix64(key_ ^ mix64(task + 0x6a09e667f3bcc909ull));
    return r;
  }

  std::uint64_t bits() { return mix64(key_ ^ mix64(++counter_)); }

  // Uniform in [0,1).
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) { return bits() % n; }

  double rademacher() { return (bits() & 1ull) ? 1.0 : -1.0; }

  double normal() {
    // Box-Muller; uses two draws per call, no caching to keep streams pure.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  Rng() = default;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace fcalc
