#include "tde/loss.hpp"

#include <atomic>
#include <cmath>
#include <string>
#include <vector>

#include "tde/errors.hpp"

namespace tde {

namespace {

constexpr double kProbFloor = 1e-12;
std::atomic<std::uint64_t> g_clamp_count{0};

}  // namespace

std::uint64_t nll_clamp_count() { return g_clamp_count.load(); }
void reset_nll_clamp_count() { g_clamp_count.store(0); }

Tensor nll_loss(const Tensor& probabilities, std::span<const int> labels) {
  const bool single = (probabilities.rank() == 1);
  const int n = single ? 1 : probabilities.rows();
  const int classes = single ? probabilities.dim(0) : probabilities.cols();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw DimensionError("nll_loss: one label per probability row required");
  }
  auto prob_at = [&](int row, int c) {
    return probabilities[static_cast<std::size_t>(row) * classes +
                         static_cast<std::size_t>(c)];
  };
  std::vector<double> picked(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int c = 0; c < classes; ++c) row_sum += prob_at(i, c);
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw DataError("nll_loss: probability row " + std::to_string(i) +
                      " sums to " + std::to_string(row_sum));
    }
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes) {
      throw DataError("nll_loss: label " + std::to_string(y) +
                      " outside [0, " + std::to_string(classes) + ")");
    }
    double p = prob_at(i, y);
    if (p < kProbFloor) {
      p = kProbFloor;
      g_clamp_count.fetch_add(1);
    }
    picked[static_cast<std::size_t>(i)] = p;
  }
  double acc = 0.0;
  for (double p : picked) acc += -std::log(p);
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));

  if (probabilities.tracked()) {
    Tape& tape = *probabilities.tape();
    out.watch(tape);
    const int pn = probabilities.node(), on = out.node();
    std::vector<int> ys(labels.begin(), labels.end());
    const double inv_n = 1.0 / static_cast<double>(n);
    tape.record(on, {pn}, [=](Tape& t) {
      double g = t.grad(on)[0];
      auto gp = t.grad(pn);
      for (int i = 0; i < n; ++i) {
        double p = picked[static_cast<std::size_t>(i)];
        if (p <= kProbFloor) continue;  // clamped: zero subgradient
        gp[static_cast<std::size_t>(i) * classes +
           static_cast<std::size_t>(ys[static_cast<std::size_t>(i)])] +=
            g * (-inv_n / p);
      }
    });
  }
  return out;
}

Tensor nll_from_probs(const Tensor& probs, int label) {
  const int labels[1] = {label};
  return nll_loss(probs, labels);
}

}  // namespace tde
