#pragma once

#include <span>

#include "tde/data.hpp"
#include "tde/model.hpp"

namespace tde {

// GRU over the conventional fixed-bin structured representation, zero
// imputation for empty bins. Shares the gru_step cell with the TDE model.
struct BaselineConfig {
  int n_variables = 0;
  int n_statics = 0;
  int n_classes = 2;
  double bin_hours = 1.0;
  double horizon_hours = 48.0;
  int input_dim = 16;
  int hidden_dim = 32;
  int classifier_hidden = 32;
  double dropout = 0.0;

  void validate() const;
};

class StructuredGruModel : public Model {
 public:
  StructuredGruModel(BaselineConfig cfg, Rng& init_rng);
  explicit StructuredGruModel(BaselineConfig cfg);  // zero-filled

  const BaselineConfig& config() const { return cfg_; }

  // Runs the GRU over every bin row (statics concatenated to each input) and
  // classifies from the final state. The grid's bin width must match the
  // model's.
  Tensor forward_probs(const StructuredGrid& grid,
                       std::span<const std::pair<int, double>> statics,
                       const DropoutCtx& dropout) const;

  std::unique_ptr<Model> clone() const override;
  std::string kind() const override { return "structured-gru"; }
  std::vector<NamedParam> named_params() override;
  Tensor instance_loss(const Instance& inst, const DropoutCtx& dropout) override;
  std::vector<double> class_probs(const Instance& inst) const override;
  int n_classes() const override { return cfg_.n_classes; }

  GruCell& gru() { return gru_; }

 private:
  BaselineConfig cfg_;
  Tensor w_in_, b_in_;  // input_dim x (n_variables + n_statics)
  GruCell gru_;
  ClassifierHead classifier_;
};

Tensor baseline_forward(const StructuredGrid& grid,
                        std::span<const std::pair<int, double>> statics,
                        const StructuredGruModel& model);

}  // namespace tde
