#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tde {

// Deterministic random source. The engine is std::mt19937_64 (bit-exact by
// the standard) but all distribution transforms are hand-rolled, because the
// std distribution objects are implementation-defined and would break frozen
// test values and cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (cosine branch only).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Knuth's product method; fine for the small rates used here.
  int poisson(double lambda);

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n) by rejection.
  std::uint64_t uniform_index(std::uint64_t n);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream seed from (base, stream) via splitmix64.
  // Used for per-instance dropout masks and per-resample bootstrap draws so
  // results do not depend on thread count or iteration order.
  static std::uint64_t derive(std::uint64_t base, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
};

}  // namespace tde
