#include "tde/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "tde/errors.hpp"
#include "tde/parallel.hpp"
#include "tde/rng.hpp"

namespace tde {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (max_epochs < 1) throw ConfigError("need at least one epoch");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout in [0, 1)");
  if (positive_class_weight <= 0.0) {
    throw ConfigError("class weight must be positive");
  }
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::init(std::span<const NamedParam> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor->numel(), 0.0);
    s.v.emplace_back(p.tensor->numel(), 0.0);
  }
  return s;
}

void adam_step(std::span<const NamedParam> params,
               std::span<const std::vector<double>> grads, AdamState& state,
               double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DimensionError("adam_step: parameter/gradient/state count mismatch");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (grads[p].size() != params[p].tensor->numel()) {
      throw DimensionError("adam_step: gradient shape mismatch for " +
                           params[p].name);
    }
    for (double g : grads[p]) {
      if (!std::isfinite(g)) {
        throw NumericError("NaN gradient in " + params[p].name +
                           "; aborting epoch");
      }
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p].tensor;
    auto& m = state.m[p];
    auto& v = state.v[p];
    const auto& g = grads[p];
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      t[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Batch gradient

namespace {

// Loss and per-parameter gradient of one instance on a fresh tape. The
// dropout stream is derived from (mask_seed, index), so the result depends
// only on the instance's position in the batch, never on scheduling.
double instance_gradient(Model& model, std::vector<NamedParam>& params,
                         const Instance& inst, std::size_t index,
                         double dropout_rate, std::uint64_t mask_seed,
                         double positive_class_weight,
                         std::vector<std::vector<double>>& out_grads) {
  Tape tape;
  for (auto& p : params) p.tensor->watch(tape);
  Rng mask_rng(Rng::derive(mask_seed, index));
  DropoutCtx ctx{dropout_rate, dropout_rate > 0.0 ? &mask_rng : nullptr};
  Tensor loss = model.instance_loss(inst, ctx);
  if (positive_class_weight != 1.0 && inst.label == 1) {
    loss = scale(loss, positive_class_weight);
  }
  tape.backward(loss.node());
  out_grads.clear();
  out_grads.reserve(params.size());
  for (auto& p : params) {
    auto g = tape.grad(p.tensor->node());
    out_grads.emplace_back(g.begin(), g.end());
  }
  for (auto& p : params) p.tensor->unwatch();
  return loss.value();
}

BatchGradient reduce_in_order(
    std::span<const NamedParam> params,
    const std::vector<std::vector<std::vector<double>>>& per_instance,
    const std::vector<double>& losses) {
  BatchGradient out;
  out.grads.reserve(params.size());
  for (const auto& p : params) out.grads.emplace_back(p.tensor->numel(), 0.0);
  for (std::size_t k = 0; k < per_instance.size(); ++k) {
    out.mean_loss += losses[k];
    for (std::size_t p = 0; p < out.grads.size(); ++p) {
      const auto& g = per_instance[k][p];
      auto& acc = out.grads[p];
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(per_instance.size());
  out.mean_loss *= inv;
  for (auto& g : out.grads)
    for (double& v : g) v *= inv;
  return out;
}

}  // namespace

BatchGradient batch_gradient_serial(Model& model,
                                    std::span<const Instance* const> batch,
                                    double dropout_rate,
                                    std::uint64_t mask_seed,
                                    double positive_class_weight) {
  if (batch.empty()) throw StateError("empty batch");
  auto params = model.named_params();
  std::vector<std::vector<std::vector<double>>> per_instance(batch.size());
  std::vector<double> losses(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    losses[k] = instance_gradient(model, params, *batch[k], k, dropout_rate,
                                  mask_seed, positive_class_weight,
                                  per_instance[k]);
  }
  return reduce_in_order(params, per_instance, losses);
}

BatchGradient batch_gradient_parallel(Model& model,
                                      std::span<const Instance* const> batch,
                                      double dropout_rate,
                                      std::uint64_t mask_seed,
                                      double positive_class_weight) {
  if (batch.empty()) throw StateError("empty batch");
  auto shared_params = model.named_params();
  std::vector<std::vector<std::vector<double>>> per_instance(batch.size());
  std::vector<double> losses(batch.size());

#pragma omp parallel num_threads(worker_count())
  {
    std::unique_ptr<Model> local = model.clone();
    auto local_params = local->named_params();
#pragma omp for schedule(dynamic, 4)
    for (std::size_t k = 0; k < batch.size(); ++k) {
      losses[k] = instance_gradient(*local, local_params, *batch[k], k,
                                    dropout_rate, mask_seed,
                                    positive_class_weight, per_instance[k]);
    }
  }
  return reduce_in_order(shared_params, per_instance, losses);
}

std::vector<double> score_dataset(const Model& model, const Dataset& ds) {
  if (model.n_classes() != 2) {
    throw ConfigError("scoring is defined for binary models");
  }
  std::vector<double> scores(ds.instances.size());
#pragma omp parallel for schedule(dynamic, 8) num_threads(worker_count())
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    scores[i] = model.class_probs(ds.instances[i])[1];
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Training loop

TrainResult train(Model& model, const Dataset& train_ds, const Dataset& val_ds,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_ds.instances.empty() || val_ds.instances.empty()) {
    throw DataError("training and validation splits must be non-empty");
  }
  auto params = model.named_params();
  AdamState adam = AdamState::init(params);

  std::vector<int> val_labels;
  for (const auto& inst : val_ds.instances) val_labels.push_back(inst.label);

  TrainResult result;
  double best_auroc = -1.0;
  std::vector<std::vector<double>> best_snapshot;
  int epochs_since_best = 0;

  std::vector<std::size_t> order(train_ds.instances.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(Rng::derive(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    const std::uint64_t mask_seed =
        Rng::derive(cfg.seed, 5000 + static_cast<std::uint64_t>(epoch));

    double loss_sum = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Instance*> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(&train_ds.instances[order[k]]);
      }
      BatchGradient bg =
          cfg.parallel
              ? batch_gradient_parallel(model, batch, cfg.dropout,
                                        Rng::derive(mask_seed, start),
                                        cfg.positive_class_weight)
              : batch_gradient_serial(model, batch, cfg.dropout,
                                      Rng::derive(mask_seed, start),
                                      cfg.positive_class_weight);
      if (!std::isfinite(bg.mean_loss)) {
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch));
      }
      loss_sum += bg.mean_loss * static_cast<double>(batch.size());
      adam_step(params, bg.grads, adam, cfg.learning_rate);
    }
    const auto t1 = std::chrono::steady_clock::now();

    std::vector<double> val_scores = score_dataset(model, val_ds);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.val_auroc = auroc(val_scores, val_labels);
    stats.val_auprc = auprc(val_scores, val_labels);
    stats.sec_per_epoch =
        std::chrono::duration<double>(t1 - t0).count();
    result.history.push_back(stats);

    if (stats.val_auroc > best_auroc) {
      best_auroc = stats.val_auroc;
      result.best_epoch = epoch;
      epochs_since_best = 0;
      best_snapshot.clear();
      for (const auto& p : params) {
        best_snapshot.emplace_back(p.tensor->data().begin(),
                                   p.tensor->data().end());
      }
    } else {
      epochs_since_best += 1;
      if (epochs_since_best >= cfg.patience) break;
    }
  }

  for (std::size_t p = 0; p < params.size(); ++p) {
    std::copy(best_snapshot[p].begin(), best_snapshot[p].end(),
              params[p].tensor->data().begin());
  }
  return result;
}

std::vector<double> time_epochs(Model& model, const Dataset& train_ds,
                                const TrainConfig& cfg, int k) {
  cfg.validate();
  auto params = model.named_params();
  AdamState adam = AdamState::init(params);
  std::vector<std::size_t> order(train_ds.instances.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> seconds;
  for (int epoch = 1; epoch <= k; ++epoch) {
    Rng shuffle_rng(Rng::derive(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    const std::uint64_t mask_seed =
        Rng::derive(cfg.seed, 5000 + static_cast<std::uint64_t>(epoch));
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Instance*> batch;
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(&train_ds.instances[order[i]]);
      BatchGradient bg =
          cfg.parallel
              ? batch_gradient_parallel(model, batch, cfg.dropout,
                                        Rng::derive(mask_seed, start),
                                        cfg.positive_class_weight)
              : batch_gradient_serial(model, batch, cfg.dropout,
                                      Rng::derive(mask_seed, start),
                                      cfg.positive_class_weight);
      adam_step(params, bg.grads, adam, cfg.learning_rate);
    }
    const auto t1 = std::chrono::steady_clock::now();
    seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  return seconds;
}

void write_history_csv(const std::string& path,
                       std::span<const EpochStats> history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,train_loss,val_auroc,val_auprc,sec_per_epoch\n";
  auto fmt = [](double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
  };
  for (const auto& e : history) {
    out << e.epoch << "," << fmt(e.train_loss) << "," << fmt(e.val_auroc)
        << "," << fmt(e.val_auprc) << "," << fmt(e.sec_per_epoch) << "\n";
  }
  if (!out.good()) throw IoError("write failure on " + path);
}

// ---------------------------------------------------------------------------
// Ablation

AblationReport run_ablation(const Dataset& train_ds, const Dataset& val_ds,
                            const Dataset& test_ds, const TdeConfig& model_cfg,
                            const TrainConfig& train_cfg, int n_bootstrap) {
  if (model_cfg.mode != AggregationMode::kAttention) {
    throw ConfigError("the ablation compares attention arms; set attention mode");
  }
  std::vector<int> test_labels;
  for (const auto& inst : test_ds.instances) test_labels.push_back(inst.label);

  AblationReport report;
  for (bool softmax_arm : {true, false}) {
    TdeConfig cfg = model_cfg;
    cfg.attention_softmax = softmax_arm;
    // Same init stream in both arms: identical starting parameters.
    Rng init(Rng::derive(train_cfg.seed, 99));
    TdeModel model(cfg, init);
    train(model, train_ds, val_ds, train_cfg);
    std::vector<double> scores = score_dataset(model, test_ds);
    EvalReport eval = evaluate(scores, test_labels, n_bootstrap, train_cfg.seed);
    (softmax_arm ? report.softmax_arm : report.non_softmax_arm) = eval;
  }
  return report;
}

std::string AblationReport::to_json() const {
  nlohmann::json j;
  j["softmax"] = nlohmann::json::parse(softmax_arm.to_json());
  j["non_softmax"] = nlohmann::json::parse(non_softmax_arm.to_json());
  return j.dump(2) + "\n";
}

}  // namespace tde
