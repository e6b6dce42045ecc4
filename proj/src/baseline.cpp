#include "tde/baseline.hpp"

#include <cmath>

#include "tde/errors.hpp"
#include "tde/loss.hpp"

namespace tde {

void BaselineConfig::validate() const {
  if (n_variables < 1) throw ConfigError("baseline needs at least one variable");
  if (n_statics < 0) throw ConfigError("negative static count");
  if (n_classes < 2) throw ConfigError("need at least two classes");
  if (bin_hours <= 0.0 || horizon_hours <= 0.0) {
    throw ConfigError("bin width and horizon must be positive");
  }
  if (input_dim < 1 || hidden_dim < 1 || classifier_hidden < 1) {
    throw ConfigError("projection and hidden dimensions must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout in [0, 1)");
}

namespace {

Tensor uniform_init(std::vector<int> shape, double fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double a = 1.0 / std::sqrt(std::max(1.0, fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-a, a);
  return t;
}

}  // namespace

StructuredGruModel::StructuredGruModel(BaselineConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int in_width = cfg_.n_variables + cfg_.n_statics;
  w_in_ = Tensor::zeros({cfg_.input_dim, in_width});
  b_in_ = Tensor::zeros({cfg_.input_dim});
  gru_.w_r = Tensor::zeros({cfg_.hidden_dim, cfg_.input_dim});
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

StructuredGruModel::StructuredGruModel(BaselineConfig cfg, Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const int in_width = cfg_.n_variables + cfg_.n_statics;
  w_in_ = uniform_init({cfg_.input_dim, in_width}, in_width, rng);
  b_in_ = uniform_init({cfg_.input_dim}, in_width, rng);
  gru_ = GruCell::init(cfg_.hidden_dim, cfg_.input_dim, rng);
  classifier_ = ClassifierHead::init(cfg_.hidden_dim, cfg_.classifier_hidden,
                                     cfg_.n_classes, rng);
}

Tensor StructuredGruModel::forward_probs(
    const StructuredGrid& grid, std::span<const std::pair<int, double>> statics,
    const DropoutCtx& dropout) const {
  if (grid.bin_hours != cfg_.bin_hours) {
    throw ConfigError("grid bin width does not match the model");
  }
  if (grid.n_variables != cfg_.n_variables) {
    throw ConfigError("grid variable count does not match the model");
  }
  std::vector<double> statics_dense(static_cast<std::size_t>(cfg_.n_statics), 0.0);
  for (const auto& [idx, value] : statics) {
    if (idx < 0 || idx >= cfg_.n_statics) {
      throw DimensionError("static index out of range");
    }
    statics_dense[static_cast<std::size_t>(idx)] = value;
  }

  Tensor h = Tensor::zeros({cfg_.hidden_dim});
  for (int bin = 0; bin < grid.n_bins; ++bin) {
    std::vector<double> row(static_cast<std::size_t>(cfg_.n_variables + cfg_.n_statics));
    for (int d = 0; d < cfg_.n_variables; ++d) {
      row[static_cast<std::size_t>(d)] = grid.value_at(bin, d);
    }
    for (int s = 0; s < cfg_.n_statics; ++s) {
      row[static_cast<std::size_t>(cfg_.n_variables + s)] =
          statics_dense[static_cast<std::size_t>(s)];
    }
    Tensor input = add(matmul(w_in_, Tensor::vector(std::move(row))), b_in_);
    h = gru_step(gru_, h, input);
  }
  return softmax(classifier_.logits(h, dropout), 0);
}

std::unique_ptr<Model> StructuredGruModel::clone() const {
  auto copy = std::make_unique<StructuredGruModel>(*this);
  for (auto& p : copy->named_params()) p.tensor->unwatch();
  return copy;
}

std::vector<NamedParam> StructuredGruModel::named_params() {
  std::vector<NamedParam> out;
  out.push_back({"w_in", &w_in_});
  out.push_back({"b_in", &b_in_});
  gru_.collect("gru.", out);
  classifier_.collect(out);
  return out;
}

Tensor StructuredGruModel::instance_loss(const Instance& inst,
                                         const DropoutCtx& dropout) {
  StructuredGrid grid =
      discretize(inst, cfg_.n_variables, cfg_.bin_hours, cfg_.horizon_hours);
  Tensor probs = forward_probs(grid, inst.statics, dropout);
  return nll_from_probs(probs, inst.label);
}

std::vector<double> StructuredGruModel::class_probs(const Instance& inst) const {
  StructuredGrid grid =
      discretize(inst, cfg_.n_variables, cfg_.bin_hours, cfg_.horizon_hours);
  Tensor probs = forward_probs(grid, inst.statics, DropoutCtx{});
  return std::vector<double>(probs.data().begin(), probs.data().end());
}

Tensor baseline_forward(const StructuredGrid& grid,
                        std::span<const std::pair<int, double>> statics,
                        const StructuredGruModel& model) {
  return model.forward_probs(grid, statics, DropoutCtx{});
}

}  // namespace tde
