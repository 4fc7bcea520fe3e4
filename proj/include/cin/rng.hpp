#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cin {

// Deterministic random source. All distribution shaping is done here from raw
// mt19937_64 draws so results do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed ^ 0x9e3779b97f4a7c15ull) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t integer(std::uint64_t n) { return gen_() % n; }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool coin(double p = 0.5) { return uniform() < p; }

  // Independent stream derived from this generator's seed and a stream id.
  Rng fork(std::uint64_t stream) {
    std::uint64_t s = gen_();
    return Rng(s ^ (stream * 0xbf58476d1ce4e5b9ull + 0x94d049bb133111ebull));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cin
