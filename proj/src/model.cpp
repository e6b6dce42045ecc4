#include "tde/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "tde/errors.hpp"
#include "tde/loss.hpp"

namespace tde {

namespace {

Tensor uniform_init(std::vector<int> shape, double fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double a = 1.0 / std::sqrt(std::max(1.0, fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-a, a);
  return t;
}

std::string format_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace

// ---------------------------------------------------------------------------
// Dropout

Tensor apply_dropout(const Tensor& x, const DropoutCtx& ctx) {
  if (!ctx.active()) return x;
  Tensor mask = Tensor::zeros(x.shape());
  const double keep = 1.0 - ctx.rate;
  for (std::size_t i = 0; i < mask.numel(); ++i) {
    mask[i] = ctx.rng->bernoulli(keep) ? 1.0 / keep : 0.0;
  }
  return mul(x, mask);
}

// ---------------------------------------------------------------------------
// GRU cell

GruCell GruCell::init(int hidden, int input, Rng& rng) {
  GruCell c;
  c.w_r = uniform_init({hidden, input}, input, rng);
  c.u_r = uniform_init({hidden, hidden}, hidden, rng);
  c.b_r = uniform_init({hidden}, hidden, rng);
  c.w_z = uniform_init({hidden, input}, input, rng);
  c.u_z = uniform_init({hidden, hidden}, hidden, rng);
  c.b_z = uniform_init({hidden}, hidden, rng);
  c.w_h = uniform_init({hidden, input}, input, rng);
  c.u_h = uniform_init({hidden, hidden}, hidden, rng);
  c.b_h = uniform_init({hidden}, hidden, rng);
  return c;
}

void GruCell::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + "w_r", &w_r});
  out.push_back({prefix + "u_r", &u_r});
  out.push_back({prefix + "b_r", &b_r});
  out.push_back({prefix + "w_z", &w_z});
  out.push_back({prefix + "u_z", &u_z});
  out.push_back({prefix + "b_z", &b_z});
  out.push_back({prefix + "w_h", &w_h});
  out.push_back({prefix + "u_h", &u_h});
  out.push_back({prefix + "b_h", &b_h});
}

Tensor gru_step(const GruCell& cell, const Tensor& h_prev, const Tensor& s_t) {
  Tensor r = sigmoid(add(add(matmul(cell.w_r, s_t), matmul(cell.u_r, h_prev)),
                         cell.b_r));
  Tensor z = sigmoid(add(add(matmul(cell.w_z, s_t), matmul(cell.u_z, h_prev)),
                         cell.b_z));
  Tensor candidate = tanh(add(
      add(matmul(cell.w_h, s_t), matmul(cell.u_h, mul(r, h_prev))), cell.b_h));
  Tensor one_minus_z = sub(Tensor::full(z.shape(), 1.0), z);
  return add(mul(z, candidate), mul(one_minus_z, h_prev));
}

// ---------------------------------------------------------------------------
// Classifier head

ClassifierHead ClassifierHead::init(int in_dim, int hidden, int n_classes,
                                    Rng& rng) {
  ClassifierHead h;
  h.w1 = uniform_init({hidden, in_dim}, in_dim, rng);
  h.b1 = uniform_init({hidden}, in_dim, rng);
  h.w2 = uniform_init({n_classes, hidden}, hidden, rng);
  h.b2 = uniform_init({n_classes}, hidden, rng);
  return h;
}

Tensor ClassifierHead::logits(const Tensor& h, const DropoutCtx& dropout) const {
  Tensor in = apply_dropout(h, dropout);
  Tensor hid = relu(add(matmul(w1, in), b1));
  return add(matmul(w2, hid), b2);
}

void ClassifierHead::collect(std::vector<NamedParam>& out) {
  out.push_back({"classifier.w1", &w1});
  out.push_back({"classifier.b1", &b1});
  out.push_back({"classifier.w2", &w2});
  out.push_back({"classifier.b2", &b2});
}

// ---------------------------------------------------------------------------
// Config

void TdeConfig::validate() const {
  if (n_variables < 1) throw ConfigError("model needs at least one variable");
  if (n_statics < 0) throw ConfigError("negative static count");
  if (n_classes < 2) throw ConfigError("need at least two classes");
  if (var_dim < 1 || time_dim < 1 || agg_dim < 1 || hidden_dim < 1 ||
      classifier_hidden < 1) {
    throw ConfigError("embedding and hidden dimensions must be positive");
  }
  if (n_statics > 0 && static_dim < 1) {
    throw ConfigError("static embedding dimension must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }
  if (mode == AggregationMode::kMean && agg_dim != var_dim) {
    throw ConfigError(
        "mean aggregation requires the aggregation and variable embedding "
        "dimensions to match");
  }
  if (mode == AggregationMode::kAttention) {
    if (heads < 1) throw ConfigError("need at least one attention head");
    if (effective_qk() < 1 || effective_v() < 1) {
      throw ConfigError("query/key/value dimensions resolve to zero; set "
                        "qk_dim/v_dim explicitly");
    }
  }
}

// ---------------------------------------------------------------------------
// Grouping

std::vector<TimeStepGroup> group_by_time(const Instance& inst) {
  std::vector<Observation> sorted = inst.observations;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Observation& a, const Observation& b) {
                     return a.time < b.time;
                   });
  std::vector<TimeStepGroup> groups;
  for (const auto& obs : sorted) {
    if (groups.empty() || groups.back().time != obs.time) {
      groups.push_back({obs.time, {}});
    }
    for (const auto& [var, _] : groups.back().items) {
      if (var == obs.variable) {
        throw DataError("instance '" + inst.id +
                        "' has duplicate (time, variable) observations");
      }
    }
    groups.back().items.emplace_back(obs.variable, obs.value);
  }
  // Within a timestep, variable order must not matter downstream; fix a
  // canonical order anyway so traces are reproducible bit for bit.
  for (auto& g : groups) std::sort(g.items.begin(), g.items.end());
  return groups;
}

// ---------------------------------------------------------------------------
// TdeModel

TdeModel::TdeModel(TdeConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  w_e_ = Tensor::zeros({cfg_.var_dim, cfg_.n_variables});
  b_e_ = Tensor::zeros({cfg_.var_dim});
  if (cfg_.n_statics > 0) {
    w_s_ = Tensor::zeros({cfg_.static_dim, cfg_.n_statics});
    b_s_ = Tensor::zeros({cfg_.static_dim});
    w_h0_ = Tensor::zeros({cfg_.hidden_dim, cfg_.static_dim});
  }
  omega_ = Tensor::zeros({cfg_.time_dim});
  beta_ = Tensor::zeros({cfg_.time_dim});
  w_t_ = Tensor::zeros({cfg_.agg_dim, cfg_.time_dim});
  if (cfg_.mode == AggregationMode::kAttention) {
    heads_.resize(static_cast<std::size_t>(cfg_.heads));
    for (auto& h : heads_) {
      h.w_q = Tensor::zeros({cfg_.effective_qk(), cfg_.var_dim});
      h.w_k = Tensor::zeros({cfg_.effective_qk(), cfg_.var_dim});
      h.w_v = Tensor::zeros({cfg_.effective_v(), cfg_.var_dim});
    }
    const int concat_dim = cfg_.heads * cfg_.effective_v();
    f_w1_ = Tensor::zeros({cfg_.effective_attn_hidden(), concat_dim});
    f_b1_ = Tensor::zeros({cfg_.effective_attn_hidden()});
    f_w2_ = Tensor::zeros({cfg_.agg_dim, cfg_.effective_attn_hidden()});
    f_b2_ = Tensor::zeros({cfg_.agg_dim});
  }
  gru_.w_r = Tensor::zeros({cfg_.hidden_dim, cfg_.agg_dim});
  gru_.u_r = Tensor::zeros({cfg_.hidden_dim, cfg_.hidden_dim});
  gru_.b_r = Tensor::zeros({cfg_.hidden_dim});
  gru_.w_z = gru_.w_r;
  gru_.u_z = gru_.u_r;
  gru_.b_z = gru_.b_r;
  gru_.w_h = gru_.w_r;
  gru_.u_h = gru_.u_r;
  gru_.b_h = gru_.b_r;
  classifier_.w1 = Tensor::zeros({cfg_.classifier_hidden, cfg_.hidden_dim});
  classifier_.b1 = Tensor::zeros({cfg_.classifier_hidden});
  classifier_.w2 = Tensor::zeros({cfg_.n_classes, cfg_.classifier_hidden});
  classifier_.b2 = Tensor::zeros({cfg_.n_classes});
}

TdeModel::TdeModel(TdeConfig cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  w_e_ = uniform_init({cfg_.var_dim, cfg_.n_variables}, cfg_.n_variables, rng);
  b_e_ = uniform_init({cfg_.var_dim}, cfg_.n_variables, rng);
  if (cfg_.n_statics > 0) {
    w_s_ = uniform_init({cfg_.static_dim, cfg_.n_statics}, cfg_.n_statics, rng);
    b_s_ = uniform_init({cfg_.static_dim}, cfg_.n_statics, rng);
    w_h0_ = uniform_init({cfg_.hidden_dim, cfg_.static_dim}, cfg_.static_dim, rng);
  }
  omega_ = uniform_init({cfg_.time_dim}, 1.0, rng);
  beta_ = uniform_init({cfg_.time_dim}, 1.0, rng);
  // The time projection starts as the identity when the sizes already agree.
  w_t_ = (cfg_.agg_dim == cfg_.time_dim)
             ? Tensor::identity(cfg_.agg_dim)
             : uniform_init({cfg_.agg_dim, cfg_.time_dim}, cfg_.time_dim, rng);
  if (cfg_.mode == AggregationMode::kAttention) {
    heads_.resize(static_cast<std::size_t>(cfg_.heads));
    for (auto& h : heads_) {
      h.w_q = uniform_init({cfg_.effective_qk(), cfg_.var_dim}, cfg_.var_dim, rng);
      h.w_k = uniform_init({cfg_.effective_qk(), cfg_.var_dim}, cfg_.var_dim, rng);
      h.w_v = uniform_init({cfg_.effective_v(), cfg_.var_dim}, cfg_.var_dim, rng);
    }
    const int concat_dim = cfg_.heads * cfg_.effective_v();
    f_w1_ = uniform_init({cfg_.effective_attn_hidden(), concat_dim}, concat_dim, rng);
    f_b1_ = uniform_init({cfg_.effective_attn_hidden()}, concat_dim, rng);
    f_w2_ = uniform_init({cfg_.agg_dim, cfg_.effective_attn_hidden()},
                         cfg_.effective_attn_hidden(), rng);
    f_b2_ = uniform_init({cfg_.agg_dim}, cfg_.effective_attn_hidden(), rng);
  }
  gru_ = GruCell::init(cfg_.hidden_dim, cfg_.agg_dim, rng);
  classifier_ = ClassifierHead::init(cfg_.hidden_dim, cfg_.classifier_hidden,
                                     cfg_.n_classes, rng);
}

Tensor TdeModel::variable_embed(int var_index) const {
  if (var_index < 0 || var_index >= cfg_.n_variables) {
    throw DimensionError("variable index " + std::to_string(var_index) +
                         " out of range");
  }
  return relu(add(col(w_e_, var_index), b_e_));
}

Tensor TdeModel::static_embed(int static_index) const {
  if (cfg_.n_statics == 0 || static_index < 0 ||
      static_index >= cfg_.n_statics) {
    throw DimensionError("static index " + std::to_string(static_index) +
                         " out of range");
  }
  return relu(add(col(w_s_, static_index), b_s_));
}

Tensor TdeModel::time_embed(double t) const {
  if (!std::isfinite(t)) throw NumericError("time embedding of non-finite t");
  Tensor phase = add(scale(omega_, t), beta_);
  Tensor linear = slice(phase, 0, 1);
  if (cfg_.time_dim == 1) return linear;
  std::vector<Tensor> parts = {linear, sin(slice(phase, 1, cfg_.time_dim - 1))};
  return concat(parts);
}

Tensor TdeModel::aggregate_mean(const TimeStepGroup& group) const {
  if (group.items.empty()) throw StateError("aggregate on empty timestep group");
  const double count = static_cast<double>(group.items.size());
  std::vector<Tensor> embeds;
  std::vector<double> weights;
  embeds.reserve(group.items.size());
  for (const auto& [var, value] : group.items) {
    embeds.push_back(variable_embed(var));
    weights.push_back(value / count);
  }
  Tensor value_term = matmul(stack_cols(embeds), Tensor::vector(weights));
  return add(value_term, matmul(w_t_, time_embed(group.time)));
}

namespace {

struct HeadInputs {
  std::vector<Tensor> embeds;
  Tensor value_vec;
};

HeadInputs gather_head_inputs(const TdeModel& model,
                              const TimeStepGroup& group) {
  HeadInputs in;
  std::vector<double> values;
  for (const auto& [var, value] : group.items) {
    in.embeds.push_back(model.variable_embed(var));
    values.push_back(value);
  }
  in.value_vec = Tensor::vector(std::move(values));
  return in;
}

// Weight vector of one head over the observed variables:
// w_i = sum_j x_j * (Q_i . K_j) / sqrt(D_k), factored through sum_j x_j K_j,
// so the weight on V_i depends on i only through Q_i. The ablation arm
// softmax-normalizes the scores over the observed subset.
Tensor head_weights(const Tensor& w_q, const Tensor& w_k, const HeadInputs& in,
                    double inv_sqrt_dk, bool use_softmax) {
  std::vector<Tensor> keys;
  keys.reserve(in.embeds.size());
  for (const Tensor& e : in.embeds) keys.push_back(matmul(w_k, e));
  Tensor key_sum = matmul(stack_cols(keys), in.value_vec);
  std::vector<Tensor> scores;
  scores.reserve(in.embeds.size());
  for (const Tensor& e : in.embeds) {
    scores.push_back(scale(dot(matmul(w_q, e), key_sum), inv_sqrt_dk));
  }
  Tensor weights = concat(scores);
  return use_softmax ? softmax(weights, 0) : weights;
}

}  // namespace

std::vector<Tensor> TdeModel::attention_head_outputs(
    const TimeStepGroup& group) const {
  if (group.items.empty()) throw StateError("aggregate on empty timestep group");
  if (cfg_.mode != AggregationMode::kAttention) {
    throw StateError("attention aggregation on a mean-mode model");
  }
  HeadInputs in = gather_head_inputs(*this, group);
  const double inv_sqrt_dk =
      1.0 / std::sqrt(static_cast<double>(cfg_.effective_qk()));
  std::vector<Tensor> outputs;
  outputs.reserve(heads_.size());
  for (const auto& head : heads_) {
    Tensor weights = head_weights(head.w_q, head.w_k, in, inv_sqrt_dk,
                                  cfg_.attention_softmax);
    std::vector<Tensor> value_cols;
    value_cols.reserve(in.embeds.size());
    for (const Tensor& e : in.embeds) value_cols.push_back(matmul(head.w_v, e));
    outputs.push_back(matmul(stack_cols(value_cols), weights));
  }
  return outputs;
}

Tensor TdeModel::aggregate_attention(const TimeStepGroup& group,
                                     const DropoutCtx& dropout) const {
  Tensor merged = concat(attention_head_outputs(group));
  Tensor hid = relu(add(matmul(f_w1_, merged), f_b1_));
  hid = apply_dropout(hid, dropout);
  Tensor mapped = add(matmul(f_w2_, hid), f_b2_);
  return add(mapped, matmul(w_t_, time_embed(group.time)));
}

Tensor TdeModel::aggregate(const TimeStepGroup& group,
                           const DropoutCtx& dropout) const {
  return cfg_.mode == AggregationMode::kMean
             ? aggregate_mean(group)
             : aggregate_attention(group, dropout);
}

std::vector<std::vector<double>> TdeModel::attention_weights(
    const TimeStepGroup& group) const {
  if (group.items.empty()) throw StateError("aggregate on empty timestep group");
  if (cfg_.mode != AggregationMode::kAttention) {
    throw StateError("attention weights on a mean-mode model");
  }
  HeadInputs in = gather_head_inputs(*this, group);
  const double inv_sqrt_dk =
      1.0 / std::sqrt(static_cast<double>(cfg_.effective_qk()));
  std::vector<std::vector<double>> out;
  for (const auto& head : heads_) {
    Tensor weights = head_weights(head.w_q, head.w_k, in, inv_sqrt_dk,
                                  cfg_.attention_softmax);
    out.emplace_back(weights.data().begin(), weights.data().end());
  }
  return out;
}

Tensor TdeModel::initial_state(const Instance& inst) const {
  if (cfg_.n_statics == 0 || inst.statics.empty()) {
    return Tensor::zeros({cfg_.hidden_dim});
  }
  const double count = static_cast<double>(inst.statics.size());
  std::vector<Tensor> embeds;
  std::vector<double> weights;
  for (const auto& [idx, value] : inst.statics) {
    embeds.push_back(static_embed(idx));
    weights.push_back(value / count);
  }
  Tensor agg = matmul(stack_cols(embeds), Tensor::vector(weights));
  return tanh(matmul(w_h0_, agg));
}

ForwardTrace TdeModel::forward(const Instance& inst,
                               const DropoutCtx& dropout) const {
  if (inst.observations.empty() && inst.statics.empty()) {
    throw DataError("instance '" + inst.id +
                    "' has no observations and no statics");
  }
  ForwardTrace trace;
  Tensor h = initial_state(inst);
  for (const TimeStepGroup& group : group_by_time(inst)) {
    Tensor s = aggregate(group, dropout);
    h = gru_step(gru_, h, s);
    trace.times.push_back(group.time);
    trace.local_status.push_back(s);
    trace.hidden.push_back(h);
  }
  trace.h_last = h;
  trace.logits = classifier_.logits(h, dropout);
  trace.probs = softmax(trace.logits, 0);
  return trace;
}

std::vector<std::pair<double, double>> TdeModel::predict_online(
    const Instance& inst) const {
  if (cfg_.n_classes != 2) {
    throw ConfigError("online prediction is defined for binary models");
  }
  ForwardTrace trace = forward(inst);
  std::vector<std::pair<double, double>> out;
  out.reserve(trace.times.size());
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    Tensor probs = softmax(classifier_.logits(trace.hidden[k], DropoutCtx{}), 0);
    out.emplace_back(trace.times[k], probs[1]);
  }
  return out;
}

std::unique_ptr<Model> TdeModel::clone() const {
  auto copy = std::make_unique<TdeModel>(*this);
  for (auto& p : copy->named_params()) p.tensor->unwatch();
  return copy;
}

std::vector<NamedParam> TdeModel::named_params() {
  std::vector<NamedParam> out;
  out.push_back({"w_e", &w_e_});
  out.push_back({"b_e", &b_e_});
  if (cfg_.n_statics > 0) {
    out.push_back({"w_s", &w_s_});
    out.push_back({"b_s", &b_s_});
    out.push_back({"w_h0", &w_h0_});
  }
  out.push_back({"omega", &omega_});
  out.push_back({"beta", &beta_});
  out.push_back({"w_t", &w_t_});
  if (cfg_.mode == AggregationMode::kAttention) {
    for (std::size_t h = 0; h < heads_.size(); ++h) {
      const std::string prefix = "head" + std::to_string(h) + ".";
      out.push_back({prefix + "w_q", &heads_[h].w_q});
      out.push_back({prefix + "w_k", &heads_[h].w_k});
      out.push_back({prefix + "w_v", &heads_[h].w_v});
    }
    out.push_back({"f.w1", &f_w1_});
    out.push_back({"f.b1", &f_b1_});
    out.push_back({"f.w2", &f_w2_});
    out.push_back({"f.b2", &f_b2_});
  }
  gru_.collect("gru.", out);
  classifier_.collect(out);
  return out;
}

Tensor TdeModel::instance_loss(const Instance& inst, const DropoutCtx& dropout) {
  ForwardTrace trace = forward(inst, dropout);
  return nll_from_probs(trace.probs, inst.label);
}

std::vector<double> TdeModel::class_probs(const Instance& inst) const {
  ForwardTrace trace = forward(inst);
  return std::vector<double>(trace.probs.data().begin(),
                             trace.probs.data().end());
}

// ---------------------------------------------------------------------------
// Embedding export

void export_embeddings(const Dataset& ds, const TdeModel& model,
                       const std::string& out_path, const std::string& which) {
  const bool local = (which == "local");
  if (!local && which != "global") {
    throw ConfigError("embedding export selects 'local' or 'global'");
  }
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write " + out_path);
  const int dims = local ? model.config().agg_dim : model.config().hidden_dim;
  out << "instance_id,time,label";
  for (int d = 0; d < dims; ++d) out << ",dim_" << d;
  out << "\n";
  for (const auto& inst : ds.instances) {
    ForwardTrace trace = model.forward(inst);
    if (local) {
      for (std::size_t k = 0; k < trace.times.size(); ++k) {
        out << inst.id << "," << format_double(trace.times[k]) << ","
            << inst.label;
        for (double v : trace.local_status[k].data())
          out << "," << format_double(v);
        out << "\n";
      }
    } else {
      double last_time = trace.times.empty() ? 0.0 : trace.times.back();
      out << inst.id << "," << format_double(last_time) << "," << inst.label;
      for (double v : trace.h_last.data()) out << "," << format_double(v);
      out << "\n";
    }
  }
  if (!out.good()) throw IoError("write failure on " + out_path);
}

}  // namespace tde
