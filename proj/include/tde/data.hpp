#pragma once

#include <optional>
#include <string>
#include <vector>

namespace tde {

// One measurement: hours since admission, raw (later normalized) value, and
// the index of the measured variable.
struct Observation {
  double time = 0.0;
  double value = 0.0;
  int variable = 0;
};

enum class VarKind {
  kNumerical,
  kIndicator,  // one category of an expanded categorical; value is always 1.0
};

struct VariableDef {
  std::string name;
  VarKind kind = VarKind::kNumerical;
  // z-score stats, fitted on the training split only.
  double mean = 0.0;
  double stddev = 1.0;
  bool constant = false;  // degenerate variance; stddev forced to 1
};

// Variable tables plus normalization state. Time-series variables and static
// variables are indexed independently; statics never enter the temporal path.
struct Schema {
  std::vector<VariableDef> variables;  // indexed by Observation::variable
  std::vector<VariableDef> statics;
  int n_classes = 2;
  bool normalizer_fitted = false;

  int n_variables() const { return static_cast<int>(variables.size()); }
  int n_statics() const { return static_cast<int>(statics.size()); }
};

// One labeled case: statics as (static index, value) pairs plus a time-sorted
// observation list with no duplicate (time, variable) pair.
struct Instance {
  std::string id;
  std::vector<std::pair<int, double>> statics;
  std::vector<Observation> observations;
  int label = 0;
};

struct Dataset {
  Schema schema;
  std::vector<Instance> instances;

  std::size_t size() const { return instances.size(); }
};

// Fixed-bin structured representation: values averaged within a bin,
// unobserved cells zero after normalization (mask[t][d] == 0 implies
// bins[t][d] == 0).
struct StructuredGrid {
  int n_bins = 0;
  int n_variables = 0;
  double bin_hours = 1.0;
  std::vector<double> values;  // n_bins x n_variables, row-major
  std::vector<char> mask;      // 1 where at least one observation landed

  double value_at(int bin, int var) const {
    return values[static_cast<std::size_t>(bin) * n_variables + var];
  }
  bool observed(int bin, int var) const {
    return mask[static_cast<std::size_t>(bin) * n_variables + var] != 0;
  }
};

// Declarative schema input (optional file). Categorical variables expand to
// one indicator variable per observed category, named "<name>=<category>",
// each with value 1.0; declared category lists pin the expansion up front.
struct SchemaSpec {
  struct Var {
    std::string name;
    bool categorical = false;
    std::vector<std::string> categories;  // optional; inferred when empty
  };
  std::vector<Var> variables;
  std::vector<Var> statics;
  int n_classes = 0;  // 0 = infer from labels
};

// ---------------------------------------------------------------------------
// Ingestion. Events CSV: header `instance_id,time,variable,value`, one row
// per observation, statics encoded with an empty time field and a `static:`
// name prefix. Labels CSV: header `instance_id,label`.

Dataset load_events(const std::string& events_path,
                    const std::string& labels_path,
                    const std::optional<SchemaSpec>& spec = std::nullopt);

SchemaSpec load_schema_spec(const std::string& path);

// Spec that reproduces an already-expanded schema's variable indices when
// reloading CSVs written by save_events.
SchemaSpec schema_spec_of(const Schema& schema);

void save_events(const Dataset& ds, const std::string& events_path,
                 const std::string& labels_path);

// ---------------------------------------------------------------------------
// Normalization. fit_normalizer computes per-variable mean/std over every
// observation in `train` (indicator variables skipped; zero-variance ones
// flagged constant with stddev forced to 1). apply_normalizer maps values
// through (x - mean) / std using previously fitted stats.

Schema fit_normalizer(const Dataset& train);
Dataset apply_normalizer(const Dataset& ds, const Schema& fitted);

// ---------------------------------------------------------------------------
// Discretization into fixed bins for the structured baseline. Values landing
// in one bin are averaged; observations at t >= horizon clamp into the last
// bin when t == horizon and are dropped beyond it.

StructuredGrid discretize(const Instance& inst, int n_variables,
                          double bin_hours, double horizon_hours);

// ---------------------------------------------------------------------------
// Stratified split. Ratios must sum to 1; every class must have at least as
// many members as there are splits.

struct SplitResult {
  Dataset train, val, test;
};

SplitResult split(const Dataset& ds, double train_ratio, double val_ratio,
                  double test_ratio, std::uint64_t seed);

}  // namespace tde
