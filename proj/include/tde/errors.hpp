#pragma once

#include <stdexcept>

namespace tde {

// Error taxonomy shared by all modules. The CLI maps each of these to a
// one-line diagnostic and a nonzero exit code.

// Shape or axis mismatch in tensor arithmetic.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (CSV rows, labels, splits).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Variable name or category not covered by the schema.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration value or incompatible dimension settings.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation invoked before its precondition state was established.
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf encountered where a finite value is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metric undefined for the given inputs (e.g. single-class labels).
struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem failure while reading or writing artifacts.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tde
