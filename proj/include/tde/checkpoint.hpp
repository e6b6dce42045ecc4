#pragma once

#include <memory>
#include <string>

#include "tde/data.hpp"
#include "tde/model.hpp"

namespace tde {

// Versioned JSON container: model kind tag, full config, the fitted schema
// (variable names + normalization stats) and every named parameter tensor.
// Doubles survive the round trip bit for bit.

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  Schema schema;
};

void save_checkpoint(const std::string& path, Model& model,
                     const Schema& schema);

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace tde
