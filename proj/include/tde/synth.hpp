#pragma once

#include <cstdint>

#include "tde/data.hpp"

namespace tde {

// Synthetic irregularly sampled dataset whose class signal lives in both the
// measured values and the sampling frequency.
//
// Generative recipe (all constants in synth.cpp):
//   label  ~ Bernoulli(class_balance)
//   visits M ~ 1 + Poisson(7), visit times Uniform(0, 48) hours, distinct
//   at each visit, every variable is observed independently with
//   probability 0.5
//   the rate variable d=0 is re-measured in a short burst when observed:
//   1 + Poisson(0.4) repeats for class 0 vs 1 + Poisson(1.8) for class 1,
//   spaced ~2 minutes apart, so its expected observation count differs 2x
//   while per-visit presence stays identical
//   observed value: base_d + scale_d * (signal_d(t, y) + N(0, 1)) with
//     signal_1 = 0.5*y + 0.35*sin(2*pi*t/48)   (shifted mean trajectory)
//     signal_2 = -0.5*y + 0.4*(t/48)           (shifted mean trajectory)
//     signal_d = 0 otherwise; d=0 carries no value signal, only rate
//   statics: age = 58 + 3*y + 10*N(0,1), sex ~ Bernoulli(0.5)
// Instances that come out with zero observations are redrawn from the same
// per-instance stream, so generation is deterministic in (seed, n, D).
struct SynthConfig {
  int n_instances = 1000;
  int n_variables = 8;  // must be >= 4
  double class_balance = 0.5;
  std::uint64_t seed = 0;
};

Dataset synth_generate(const SynthConfig& cfg);

}  // namespace tde
