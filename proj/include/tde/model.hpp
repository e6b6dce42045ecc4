#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tde/data.hpp"
#include "tde/rng.hpp"
#include "tde/tensor.hpp"

namespace tde {

// ---------------------------------------------------------------------------
// Shared pieces

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

// Inverted dropout, active only while training. rate == 0 or rng == nullptr
// disables it.
struct DropoutCtx {
  double rate = 0.0;
  Rng* rng = nullptr;
  bool active() const { return rate > 0.0 && rng != nullptr; }
};

Tensor apply_dropout(const Tensor& x, const DropoutCtx& ctx);

// GRU cell parameters. Both the TDE model and the structured baseline hold
// one of these and step it through the single gru_step routine below.
struct GruCell {
  Tensor w_r, w_z, w_h;  // hidden x input
  Tensor u_r, u_z, u_h;  // hidden x hidden
  Tensor b_r, b_z, b_h;  // hidden

  static GruCell init(int hidden, int input, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
};

// r = sigma(W_r s + U_r h + b_r); z likewise; candidate via tanh with the
// reset gate on h; new state z*candidate + (1-z)*h.
Tensor gru_step(const GruCell& cell, const Tensor& h_prev, const Tensor& s_t);

// One-hidden-layer classifier head; dropout applies to its input.
struct ClassifierHead {
  Tensor w1, b1, w2, b2;

  static ClassifierHead init(int in_dim, int hidden, int n_classes, Rng& rng);
  Tensor logits(const Tensor& h, const DropoutCtx& dropout) const;
  void collect(std::vector<NamedParam>& out);
};

// Polymorphic surface the trainer, evaluator and checkpoint code share.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::unique_ptr<Model> clone() const = 0;
  virtual std::string kind() const = 0;
  virtual std::vector<NamedParam> named_params() = 0;
  // Scalar loss of one instance; recorded on a tape when the parameters are
  // watched. `dropout` carries the training-mode mask source.
  virtual Tensor instance_loss(const Instance& inst,
                               const DropoutCtx& dropout) = 0;
  virtual std::vector<double> class_probs(const Instance& inst) const = 0;
  virtual int n_classes() const = 0;
};

// ---------------------------------------------------------------------------
// TDE model

enum class AggregationMode { kMean, kAttention };

struct TdeConfig {
  int n_variables = 0;  // D
  int n_statics = 0;
  int n_classes = 2;
  AggregationMode mode = AggregationMode::kAttention;
  bool attention_softmax = false;  // ablation arm
  int var_dim = 16;     // variable embedding size
  int time_dim = 8;     // time embedding size
  int agg_dim = 16;     // aggregation embedding size
  int static_dim = 4;   // static embedding size
  int heads = 2;        // H
  int qk_dim = 0;       // 0 -> var_dim / heads
  int v_dim = 0;        // 0 -> var_dim / heads
  int attn_hidden = 0;  // hidden width of the post-concat map; 0 -> agg_dim
  int hidden_dim = 32;  // recurrent state
  int classifier_hidden = 32;
  double dropout = 0.0;

  int effective_qk() const { return qk_dim > 0 ? qk_dim : var_dim / heads; }
  int effective_v() const { return v_dim > 0 ? v_dim : var_dim / heads; }
  int effective_attn_hidden() const {
    return attn_hidden > 0 ? attn_hidden : agg_dim;
  }
  void validate() const;  // throws ConfigError on inconsistent dimensions
};

// The variables observed at one unique timestamp: (variable index, value)
// pairs with distinct indices.
struct TimeStepGroup {
  double time = 0.0;
  std::vector<std::pair<int, double>> items;
};

// Groups an instance's observations by unique time, ascending. Input order
// is irrelevant; duplicate (time, variable) pairs are rejected.
std::vector<TimeStepGroup> group_by_time(const Instance& inst);

struct ForwardTrace {
  std::vector<double> times;         // unique observation times, ascending
  std::vector<Tensor> local_status;  // aggregated embedding per timestep
  std::vector<Tensor> hidden;        // recurrent state per timestep
  Tensor h_last;                     // final state (h0 when no observations)
  Tensor logits;
  Tensor probs;
};

class TdeModel : public Model {
 public:
  TdeModel(TdeConfig cfg, Rng& init_rng);
  explicit TdeModel(TdeConfig cfg);  // zero-filled; checkpoint loading

  const TdeConfig& config() const { return cfg_; }

  // ReLU(column i of the embedding table + bias); coordinatewise >= 0.
  Tensor variable_embed(int var_index) const;
  Tensor static_embed(int static_index) const;

  // Index 0 is the linear term omega_0*t + beta_0; the rest are sinusoids.
  Tensor time_embed(double t) const;

  Tensor aggregate_mean(const TimeStepGroup& group) const;
  Tensor aggregate_attention(const TimeStepGroup& group) const {
    return aggregate_attention(group, DropoutCtx{});
  }
  Tensor aggregate_attention(const TimeStepGroup& group,
                             const DropoutCtx& dropout) const;
  Tensor aggregate(const TimeStepGroup& group, const DropoutCtx& dropout) const;

  // Per-head raw attention weights over the observed variables of a group
  // (softmax-normalized in the ablation arm). Exposed for invariant tests.
  std::vector<std::vector<double>> attention_weights(
      const TimeStepGroup& group) const;

  // Per-head aggregated value vectors before the post-concat map; in the
  // non-softmax arm these are bilinear in the observed values.
  std::vector<Tensor> attention_head_outputs(const TimeStepGroup& group) const;

  ForwardTrace forward(const Instance& inst) const {
    return forward(inst, DropoutCtx{});
  }
  ForwardTrace forward(const Instance& inst, const DropoutCtx& dropout) const;

  // One (time, probability-of-class-1) entry per unique timestep, each
  // depending only on observations at or before that time.
  std::vector<std::pair<double, double>> predict_online(
      const Instance& inst) const;

  // Model interface
  std::unique_ptr<Model> clone() const override;
  std::string kind() const override { return "tde"; }
  std::vector<NamedParam> named_params() override;
  Tensor instance_loss(const Instance& inst, const DropoutCtx& dropout) override;
  std::vector<double> class_probs(const Instance& inst) const override;
  int n_classes() const override { return cfg_.n_classes; }

  GruCell& gru() { return gru_; }

 private:
  Tensor initial_state(const Instance& inst) const;

  TdeConfig cfg_;

  Tensor w_e_, b_e_;           // variable embedding table
  Tensor w_s_, b_s_, w_h0_;    // statics path (empty when n_statics == 0)
  Tensor omega_, beta_, w_t_;  // time embedding + projection into agg space
  struct Head {
    Tensor w_q, w_k, w_v;
  };
  std::vector<Head> heads_;               // attention mode only
  Tensor f_w1_, f_b1_, f_w2_, f_b2_;      // post-concat two-layer map
  GruCell gru_;
  ClassifierHead classifier_;
};

// CSV export of per-timestep local status (`which` == "local") or the final
// hidden state per instance ("global"). Rows are
// `instance_id,time,label,dim_0..dim_{Z-1}`.
void export_embeddings(const Dataset& ds, const TdeModel& model,
                       const std::string& out_path, const std::string& which);

}  // namespace tde
