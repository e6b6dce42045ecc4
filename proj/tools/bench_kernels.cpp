// Benchmark of the batch-gradient kernels: the serial reference against the
// OpenMP-parallel version, on both model kinds. Also asserts that the two
// kernels agree bit for bit, which is the contract that makes the parallel
// path safe to enable by default.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "tde/baseline.hpp"
#include "tde/model.hpp"
#include "tde/parallel.hpp"
#include "tde/rng.hpp"
#include "tde/synth.hpp"
#include "tde/training.hpp"

using namespace tde;

namespace {

double time_kernel(Model& model, std::span<const Instance* const> batch,
                   bool parallel, int reps) {
  double best = 1e100;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    BatchGradient bg = parallel ? batch_gradient_parallel(model, batch, 0.0, 7)
                                : batch_gradient_serial(model, batch, 0.0, 7);
    auto t1 = std::chrono::steady_clock::now();
    (void)bg;
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

bool bitwise_equal(const BatchGradient& a, const BatchGradient& b) {
  if (std::memcmp(&a.mean_loss, &b.mean_loss, sizeof(double)) != 0) return false;
  if (a.grads.size() != b.grads.size()) return false;
  for (std::size_t p = 0; p < a.grads.size(); ++p) {
    if (a.grads[p].size() != b.grads[p].size()) return false;
    if (std::memcmp(a.grads[p].data(), b.grads[p].data(),
                    a.grads[p].size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  int n = argc > 1 ? std::atoi(argv[1]) : 256;
  int reps = argc > 2 ? std::atoi(argv[2]) : 3;

  Dataset raw = synth_generate({n, 8, 0.5, 4242});
  Dataset ds = apply_normalizer(raw, fit_normalizer(raw));
  std::vector<const Instance*> batch;
  for (const auto& inst : ds.instances) batch.push_back(&inst);

  std::printf("batch=%d reps=%d workers=%d\n", n, reps, worker_count());
  std::printf("%-14s %12s %12s %9s %8s\n", "model", "serial(s)", "parallel(s)",
              "speedup", "bitwise");

  struct Case {
    const char* name;
    std::unique_ptr<Model> model;
  };
  std::vector<Case> cases;
  {
    TdeConfig mean_cfg;
    mean_cfg.n_variables = 8;
    mean_cfg.n_statics = 2;
    mean_cfg.mode = AggregationMode::kMean;
    mean_cfg.var_dim = 16;
    mean_cfg.agg_dim = 16;
    mean_cfg.time_dim = 8;
    mean_cfg.static_dim = 4;
    mean_cfg.hidden_dim = 32;
    mean_cfg.classifier_hidden = 32;
    Rng r1(1);
    cases.push_back({"tde-mean", std::make_unique<TdeModel>(mean_cfg, r1)});

    TdeConfig attn_cfg = mean_cfg;
    attn_cfg.mode = AggregationMode::kAttention;
    attn_cfg.heads = 2;
    attn_cfg.qk_dim = 8;
    attn_cfg.v_dim = 8;
    attn_cfg.attn_hidden = 16;
    Rng r2(2);
    cases.push_back({"tde-attn", std::make_unique<TdeModel>(attn_cfg, r2)});

    BaselineConfig gru_cfg;
    gru_cfg.n_variables = 8;
    gru_cfg.n_statics = 2;
    gru_cfg.input_dim = 16;
    gru_cfg.hidden_dim = 32;
    gru_cfg.classifier_hidden = 32;
    Rng r3(3);
    cases.push_back(
        {"gru-baseline", std::make_unique<StructuredGruModel>(gru_cfg, r3)});
  }

  int failures = 0;
  for (auto& c : cases) {
    BatchGradient serial = batch_gradient_serial(*c.model, batch, 0.0, 7);
    BatchGradient parallel = batch_gradient_parallel(*c.model, batch, 0.0, 7);
    const bool equal = bitwise_equal(serial, parallel);
    failures += equal ? 0 : 1;

    double ts = time_kernel(*c.model, batch, false, reps);
    double tp = time_kernel(*c.model, batch, true, reps);
    std::printf("%-14s %12.4f %12.4f %8.2fx %8s\n", c.name, ts, tp, ts / tp,
                equal ? "yes" : "NO");
  }
  return failures == 0 ? 0 : 1;
}
