#pragma once

#include <cstdint>
#include <span>

#include "tde/tensor.hpp"

namespace tde {

// Mean negative log probability of the true class over a {n, C} probability
// matrix whose rows sum to 1. A true-class probability below 1e-12 is clamped
// there (with the event counted) so the loss stays finite; the clamp region
// contributes zero gradient.
Tensor nll_loss(const Tensor& probabilities, std::span<const int> labels);

// Single-instance convenience over a rank-1 probability vector.
Tensor nll_from_probs(const Tensor& probs, int label);

// Process-wide count of clamp events, for divergence diagnostics.
std::uint64_t nll_clamp_count();
void reset_nll_clamp_count();

}  // namespace tde
