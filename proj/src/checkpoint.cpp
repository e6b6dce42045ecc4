#include "tde/checkpoint.hpp"

#include <fstream>

#include "json.hpp"
#include "tde/baseline.hpp"
#include "tde/errors.hpp"

namespace tde {

namespace {

constexpr int kFormatVersion = 1;

nlohmann::json schema_to_json(const Schema& schema) {
  auto defs_to_json = [](const std::vector<VariableDef>& defs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : defs) {
      arr.push_back({{"name", d.name},
                     {"kind", d.kind == VarKind::kNumerical ? "numerical"
                                                            : "indicator"},
                     {"mean", d.mean},
                     {"stddev", d.stddev},
                     {"constant", d.constant}});
    }
    return arr;
  };
  nlohmann::json j;
  j["variables"] = defs_to_json(schema.variables);
  j["statics"] = defs_to_json(schema.statics);
  j["n_classes"] = schema.n_classes;
  j["normalizer_fitted"] = schema.normalizer_fitted;
  return j;
}

Schema schema_from_json(const nlohmann::json& j) {
  auto defs_from_json = [](const nlohmann::json& arr) {
    std::vector<VariableDef> defs;
    for (const auto& d : arr) {
      VariableDef def;
      def.name = d.at("name").get<std::string>();
      def.kind = d.at("kind").get<std::string>() == "numerical"
                     ? VarKind::kNumerical
                     : VarKind::kIndicator;
      def.mean = d.at("mean").get<double>();
      def.stddev = d.at("stddev").get<double>();
      def.constant = d.at("constant").get<bool>();
      defs.push_back(std::move(def));
    }
    return defs;
  };
  Schema schema;
  schema.variables = defs_from_json(j.at("variables"));
  schema.statics = defs_from_json(j.at("statics"));
  schema.n_classes = j.at("n_classes").get<int>();
  schema.normalizer_fitted = j.at("normalizer_fitted").get<bool>();
  return schema;
}

nlohmann::json tde_config_to_json(const TdeConfig& c) {
  return {{"n_variables", c.n_variables},
          {"n_statics", c.n_statics},
          {"n_classes", c.n_classes},
          {"mode", c.mode == AggregationMode::kMean ? "mean" : "attention"},
          {"attention_softmax", c.attention_softmax},
          {"var_dim", c.var_dim},
          {"time_dim", c.time_dim},
          {"agg_dim", c.agg_dim},
          {"static_dim", c.static_dim},
          {"heads", c.heads},
          {"qk_dim", c.qk_dim},
          {"v_dim", c.v_dim},
          {"attn_hidden", c.attn_hidden},
          {"hidden_dim", c.hidden_dim},
          {"classifier_hidden", c.classifier_hidden},
          {"dropout", c.dropout}};
}

TdeConfig tde_config_from_json(const nlohmann::json& j) {
  TdeConfig c;
  c.n_variables = j.at("n_variables").get<int>();
  c.n_statics = j.at("n_statics").get<int>();
  c.n_classes = j.at("n_classes").get<int>();
  c.mode = j.at("mode").get<std::string>() == "mean" ? AggregationMode::kMean
                                                     : AggregationMode::kAttention;
  c.attention_softmax = j.at("attention_softmax").get<bool>();
  c.var_dim = j.at("var_dim").get<int>();
  c.time_dim = j.at("time_dim").get<int>();
  c.agg_dim = j.at("agg_dim").get<int>();
  c.static_dim = j.at("static_dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.qk_dim = j.at("qk_dim").get<int>();
  c.v_dim = j.at("v_dim").get<int>();
  c.attn_hidden = j.at("attn_hidden").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.classifier_hidden = j.at("classifier_hidden").get<int>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

nlohmann::json baseline_config_to_json(const BaselineConfig& c) {
  return {{"n_variables", c.n_variables},
          {"n_statics", c.n_statics},
          {"n_classes", c.n_classes},
          {"bin_hours", c.bin_hours},
          {"horizon_hours", c.horizon_hours},
          {"input_dim", c.input_dim},
          {"hidden_dim", c.hidden_dim},
          {"classifier_hidden", c.classifier_hidden},
          {"dropout", c.dropout}};
}

BaselineConfig baseline_config_from_json(const nlohmann::json& j) {
  BaselineConfig c;
  c.n_variables = j.at("n_variables").get<int>();
  c.n_statics = j.at("n_statics").get<int>();
  c.n_classes = j.at("n_classes").get<int>();
  c.bin_hours = j.at("bin_hours").get<double>();
  c.horizon_hours = j.at("horizon_hours").get<double>();
  c.input_dim = j.at("input_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.classifier_hidden = j.at("classifier_hidden").get<int>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model,
                     const Schema& schema) {
  nlohmann::json j;
  j["format"] = "tde-checkpoint";
  j["format_version"] = kFormatVersion;
  j["kind"] = model.kind();
  if (auto* tde = dynamic_cast<TdeModel*>(&model)) {
    j["config"] = tde_config_to_json(tde->config());
  } else if (auto* gru = dynamic_cast<StructuredGruModel*>(&model)) {
    j["config"] = baseline_config_to_json(gru->config());
  } else {
    throw ConfigError("unknown model kind '" + model.kind() + "'");
  }
  j["schema"] = schema_to_json(schema);
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model.named_params()) {
    params.push_back({{"name", p.name},
                      {"shape", p.tensor->shape()},
                      {"data", std::vector<double>(p.tensor->data().begin(),
                                                   p.tensor->data().end())}});
  }
  j["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out.good()) throw IoError("write failure on " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != "tde-checkpoint") {
    throw IoError("not a checkpoint file: " + path);
  }
  if (j.at("format_version").get<int>() != kFormatVersion) {
    throw IoError("unsupported checkpoint version in " + path);
  }
  LoadedCheckpoint loaded;
  loaded.schema = schema_from_json(j.at("schema"));
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "tde") {
    loaded.model = std::make_unique<TdeModel>(tde_config_from_json(j.at("config")));
  } else if (kind == "structured-gru") {
    loaded.model = std::make_unique<StructuredGruModel>(
        baseline_config_from_json(j.at("config")));
  } else {
    throw IoError("unknown model kind '" + kind + "' in " + path);
  }

  std::map<std::string, const nlohmann::json*> by_name;
  for (const auto& p : j.at("params")) {
    by_name[p.at("name").get<std::string>()] = &p;
  }
  auto params = loaded.model->named_params();
  if (by_name.size() != params.size()) {
    throw IoError("checkpoint parameter list does not match the model");
  }
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      throw IoError("checkpoint missing parameter '" + p.name + "'");
    }
    auto shape = it->second->at("shape").get<std::vector<int>>();
    auto data = it->second->at("data").get<std::vector<double>>();
    if (shape != p.tensor->shape() || data.size() != p.tensor->numel()) {
      throw IoError("checkpoint shape mismatch for '" + p.name + "'");
    }
    std::copy(data.begin(), data.end(), p.tensor->data().begin());
  }
  return loaded;
}

}  // namespace tde
