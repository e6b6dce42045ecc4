#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tde/data.hpp"
#include "tde/loss.hpp"
#include "tde/metrics.hpp"
#include "tde/model.hpp"

namespace tde {

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 0.001;
  int max_epochs = 50;
  int patience = 5;  // epochs without validation-AUROC improvement
  std::uint64_t seed = 0;
  double dropout = 0.0;
  // Optional extension: multiplies the loss of positive instances. The loss
  // itself is the plain unweighted mean at the default of 1.
  double positive_class_weight = 1.0;
  bool parallel = true;  // OpenMP batch kernel; false runs the serial reference

  void validate() const;
};

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m, v;  // first/second moments per parameter

  static AdamState init(std::span<const NamedParam> params);
};

// Standard bias-corrected update. Throws NumericError on a NaN gradient.
void adam_step(std::span<const NamedParam> params,
               std::span<const std::vector<double>> grads, AdamState& state,
               double lr);

// ---------------------------------------------------------------------------
// Batch gradient kernels. Loss and gradient are plain means over the batch.
//
// Both kernels produce bit-identical results: each instance's contribution is
// computed on its own tape, and the reduction always runs in batch order.
// The serial kernel is the reference; the parallel kernel fans instances out
// across OpenMP workers on thread-local model clones.

struct BatchGradient {
  double mean_loss = 0.0;
  std::vector<std::vector<double>> grads;  // aligned with model.named_params()
};

BatchGradient batch_gradient_serial(Model& model,
                                    std::span<const Instance* const> batch,
                                    double dropout_rate,
                                    std::uint64_t mask_seed,
                                    double positive_class_weight = 1.0);

BatchGradient batch_gradient_parallel(Model& model,
                                      std::span<const Instance* const> batch,
                                      double dropout_rate,
                                      std::uint64_t mask_seed,
                                      double positive_class_weight = 1.0);

// Probability of class 1 for every instance, evaluation-mode, parallel over
// instances (the model is shared read-only).
std::vector<double> score_dataset(const Model& model, const Dataset& ds);

// ---------------------------------------------------------------------------
// Training loop

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_auroc = 0.0;
  double val_auprc = 0.0;
  double sec_per_epoch = 0.0;  // forward+backward+step time, excludes eval
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = 0;  // 1-based epoch whose parameters the model carries
};

// Trains in place with seeded shuffling and early stopping on validation
// AUROC; on return the model holds the best-epoch parameters.
TrainResult train(Model& model, const Dataset& train_ds, const Dataset& val_ds,
                  const TrainConfig& cfg);

void write_history_csv(const std::string& path,
                       std::span<const EpochStats> history);

// Wall-clock seconds of `k` full training epochs (shuffle + forward +
// backward + optimizer step; no validation pass). Used by the epoch
// benchmark.
std::vector<double> time_epochs(Model& model, const Dataset& train_ds,
                                const TrainConfig& cfg, int k);

// ---------------------------------------------------------------------------
// Softmax-vs-non-softmax ablation: both arms start from identical parameters
// (same init seed) and train under the same config.

struct AblationReport {
  EvalReport softmax_arm;
  EvalReport non_softmax_arm;
  std::string to_json() const;
};

AblationReport run_ablation(const Dataset& train_ds, const Dataset& val_ds,
                            const Dataset& test_ds, const TdeConfig& model_cfg,
                            const TrainConfig& train_cfg, int n_bootstrap);

}  // namespace tde
