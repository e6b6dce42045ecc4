// Command-line surface: data generation, training, evaluation, online
// prediction, embedding export, the softmax ablation, and epoch timing.
// Every command is non-interactive and writes its outputs plus a manifest
// into one run directory.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tde/baseline.hpp"
#include "tde/checkpoint.hpp"
#include "tde/data.hpp"
#include "tde/errors.hpp"
#include "tde/metrics.hpp"
#include "tde/model.hpp"
#include "tde/parallel.hpp"
#include "tde/rng.hpp"
#include "tde/synth.hpp"
#include "tde/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Run directory + manifest

std::string utc_stamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path resolve_run_dir(const std::string& out, const std::string& tag) {
  fs::path dir = out.empty() ? fs::path("runs") / (utc_stamp() + "-" + tag)
                             : fs::path(out);
  fs::create_directories(dir);
  return dir;
}

std::uint64_t fnv1a64_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tde::IoError("cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::size_t line_count(const fs::path& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

json file_fingerprint(const std::string& path) {
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64_file(path)));
  return {{"path", path}, {"rows", line_count(path)}, {"fnv1a64", hex}};
}

class Manifest {
 public:
  Manifest(std::string command, std::uint64_t seed) {
    j_["command"] = std::move(command);
    j_["version"] = kVersion;
    j_["seed"] = seed;
    j_["created_utc"] = utc_stamp();
    j_["workers"] = tde::worker_count();
    start_ = std::chrono::steady_clock::now();
  }
  void config(json cfg) { j_["config"] = std::move(cfg); }
  void dataset(const std::string& name, const std::string& path) {
    j_["datasets"][name] = file_fingerprint(path);
  }
  void timing(const std::string& name, double seconds) {
    j_["timings_sec"][name] = seconds;
  }
  void note(const std::string& key, json value) { j_[key] = std::move(value); }
  void write(const fs::path& dir) {
    j_["timings_sec"]["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    std::ofstream out(dir / "manifest.json");
    if (!out) throw tde::IoError("cannot write manifest");
    out << j_.dump(2) << "\n";
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Shared option bundles

struct DataOpts {
  std::string events, labels, schema;

  void attach(CLI::App* cmd) {
    cmd->add_option("--events", events, "events CSV")->required();
    cmd->add_option("--labels", labels, "labels CSV")->required();
    cmd->add_option("--schema", schema, "schema JSON (inferred when absent)");
  }
  tde::Dataset load() const {
    std::optional<tde::SchemaSpec> spec;
    if (!schema.empty()) spec = tde::load_schema_spec(schema);
    return tde::load_events(events, labels, spec);
  }
  void fingerprint(Manifest& m) const {
    m.dataset("events", events);
    m.dataset("labels", labels);
    if (!schema.empty()) m.dataset("schema", schema);
  }
};

struct ModelOpts {
  std::string arch = "tde";
  std::string mode = "attention";
  bool softmax = false;
  int heads = 2;
  int var_dim = 16, time_dim = 8, agg_dim = 16, static_dim = 4;
  int qk_dim = 0, v_dim = 0, attn_hidden = 0;
  int hidden_dim = 32, classifier_hidden = 32;
  double bin_hours = 1.0, horizon_hours = 48.0;
  int input_dim = 16;

  void attach(CLI::App* cmd, bool with_arch) {
    if (with_arch) {
      cmd->add_option("--arch", arch, "tde | gru-baseline")
          ->check(CLI::IsMember({"tde", "gru-baseline"}));
    }
    cmd->add_option("--mode", mode, "aggregation: mean | attention")
        ->check(CLI::IsMember({"mean", "attention"}));
    cmd->add_flag("--softmax,!--no-softmax", softmax,
                  "softmax attention arm (default: non-softmax)");
    cmd->add_option("--heads", heads, "attention heads");
    cmd->add_option("--var-dim", var_dim, "variable embedding size");
    cmd->add_option("--time-dim", time_dim, "time embedding size");
    cmd->add_option("--agg-dim", agg_dim, "aggregation embedding size");
    cmd->add_option("--static-dim", static_dim, "static embedding size");
    cmd->add_option("--qk-dim", qk_dim, "query/key size (0: var-dim/heads)");
    cmd->add_option("--v-dim", v_dim, "value size (0: var-dim/heads)");
    cmd->add_option("--attn-hidden", attn_hidden,
                    "post-concat hidden width (0: agg-dim)");
    cmd->add_option("--hidden", hidden_dim, "recurrent hidden units");
    cmd->add_option("--classifier-hidden", classifier_hidden,
                    "classifier hidden units");
    cmd->add_option("--bin-hours", bin_hours, "baseline bin width");
    cmd->add_option("--horizon-hours", horizon_hours, "baseline horizon");
    cmd->add_option("--input-dim", input_dim, "baseline input projection");
  }

  tde::TdeConfig tde_config(const tde::Schema& schema, double dropout) const {
    tde::TdeConfig cfg;
    cfg.n_variables = schema.n_variables();
    cfg.n_statics = schema.n_statics();
    cfg.n_classes = schema.n_classes;
    cfg.mode = mode == "mean" ? tde::AggregationMode::kMean
                              : tde::AggregationMode::kAttention;
    cfg.attention_softmax = softmax;
    cfg.var_dim = var_dim;
    cfg.time_dim = time_dim;
    cfg.agg_dim = mode == "mean" ? var_dim : agg_dim;
    cfg.static_dim = static_dim;
    cfg.heads = heads;
    cfg.qk_dim = qk_dim;
    cfg.v_dim = v_dim;
    cfg.attn_hidden = attn_hidden;
    cfg.hidden_dim = hidden_dim;
    cfg.classifier_hidden = classifier_hidden;
    cfg.dropout = dropout;
    return cfg;
  }

  tde::BaselineConfig baseline_config(const tde::Schema& schema,
                                      double dropout) const {
    tde::BaselineConfig cfg;
    cfg.n_variables = schema.n_variables();
    cfg.n_statics = schema.n_statics();
    cfg.n_classes = schema.n_classes;
    cfg.bin_hours = bin_hours;
    cfg.horizon_hours = horizon_hours;
    cfg.input_dim = input_dim;
    cfg.hidden_dim = hidden_dim;
    cfg.classifier_hidden = classifier_hidden;
    cfg.dropout = dropout;
    return cfg;
  }

  json to_json() const {
    return {{"arch", arch},
            {"mode", mode},
            {"softmax", softmax},
            {"heads", heads},
            {"var_dim", var_dim},
            {"time_dim", time_dim},
            {"agg_dim", agg_dim},
            {"static_dim", static_dim},
            {"qk_dim", qk_dim},
            {"v_dim", v_dim},
            {"attn_hidden", attn_hidden},
            {"hidden_dim", hidden_dim},
            {"classifier_hidden", classifier_hidden},
            {"bin_hours", bin_hours},
            {"horizon_hours", horizon_hours},
            {"input_dim", input_dim}};
  }
};

struct TrainOpts {
  int batch = 256;
  double lr = 0.001;
  int epochs = 50;
  int patience = 5;
  double dropout = 0.0;
  double positive_weight = 1.0;
  std::uint64_t split_seed = 0;
  bool serial = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--batch", batch, "mini-batch size")->capture_default_str();
    cmd->add_option("--lr", lr, "learning rate")->capture_default_str();
    cmd->add_option("--epochs", epochs, "epoch cap")->capture_default_str();
    cmd->add_option("--patience", patience, "early-stopping patience")
        ->capture_default_str();
    cmd->add_option("--dropout", dropout, "dropout rate")->capture_default_str();
    cmd->add_option("--positive-weight", positive_weight,
                    "loss weight of the positive class");
    cmd->add_flag("--serial", serial, "use the serial gradient kernel");
  }
  tde::TrainConfig config(std::uint64_t seed) const {
    tde::TrainConfig cfg;
    cfg.batch_size = batch;
    cfg.learning_rate = lr;
    cfg.max_epochs = epochs;
    cfg.patience = patience;
    cfg.seed = seed;
    cfg.dropout = dropout;
    cfg.positive_class_weight = positive_weight;
    cfg.parallel = !serial;
    return cfg;
  }
  json to_json(std::uint64_t seed) const {
    return {{"batch", batch},     {"lr", lr},
            {"epochs", epochs},   {"patience", patience},
            {"dropout", dropout}, {"positive_weight", positive_weight},
            {"seed", seed},       {"parallel", !serial}};
  }
};

// Stratified 6:2:2 with normalization stats fitted on the training split.
struct Splits {
  tde::Dataset train, val, test;
  tde::Schema fitted;
};

Splits split_and_normalize(const tde::Dataset& ds, std::uint64_t seed) {
  tde::SplitResult sr = tde::split(ds, 0.6, 0.2, 0.2, seed);
  Splits out;
  out.fitted = tde::fit_normalizer(sr.train);
  out.train = tde::apply_normalizer(sr.train, out.fitted);
  out.val = tde::apply_normalizer(sr.val, out.fitted);
  out.test = tde::apply_normalizer(sr.test, out.fitted);
  return out;
}

std::vector<int> labels_of(const tde::Dataset& ds) {
  std::vector<int> labels;
  labels.reserve(ds.size());
  for (const auto& inst : ds.instances) labels.push_back(inst.label);
  return labels;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw tde::IoError("cannot write " + path.string());
  out << text;
}

std::string fmt_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

// Checks that a dataset loaded for inference matches the checkpoint schema,
// then applies the stored normalizer.
tde::Dataset align_to_checkpoint(const tde::Dataset& ds,
                                 const tde::Schema& stored) {
  if (ds.schema.variables.size() != stored.variables.size() ||
      ds.schema.statics.size() != stored.statics.size()) {
    throw tde::SchemaError(
        "dataset variables do not match the checkpoint schema");
  }
  for (std::size_t i = 0; i < stored.variables.size(); ++i) {
    if (ds.schema.variables[i].name != stored.variables[i].name) {
      throw tde::SchemaError("variable order mismatch at index " +
                             std::to_string(i) + ": '" +
                             ds.schema.variables[i].name + "' vs '" +
                             stored.variables[i].name + "'");
    }
  }
  return tde::apply_normalizer(ds, stored);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_synth(const std::string& out, int n, int dims, double balance,
              std::uint64_t seed) {
  fs::path dir = resolve_run_dir(out, "synth");
  Manifest manifest("synth", seed);
  manifest.config({{"n", n}, {"dims", dims}, {"balance", balance}});
  tde::Dataset ds = tde::synth_generate({n, dims, balance, seed});
  tde::save_events(ds, (dir / "events.csv").string(),
                   (dir / "labels.csv").string());
  manifest.dataset("events", (dir / "events.csv").string());
  manifest.dataset("labels", (dir / "labels.csv").string());
  manifest.write(dir);
  std::cout << dir.string() << "\n";
  return 0;
}

int cmd_train(const DataOpts& data, const ModelOpts& model_opts,
              const TrainOpts& train_opts, std::uint64_t seed, int n_bootstrap,
              const std::string& out) {
  fs::path dir = resolve_run_dir(out, "train");
  Manifest manifest("train", seed);
  manifest.config({{"model", model_opts.to_json()},
                   {"train", train_opts.to_json(seed)},
                   {"bootstrap", n_bootstrap}});
  data.fingerprint(manifest);

  tde::Dataset raw = data.load();
  std::uint64_t split_seed = train_opts.split_seed ? train_opts.split_seed : seed;
  Splits splits = split_and_normalize(raw, split_seed);

  std::unique_ptr<tde::Model> model;
  tde::Rng init(tde::Rng::derive(seed, 99));
  if (model_opts.arch == "gru-baseline") {
    model = std::make_unique<tde::StructuredGruModel>(
        model_opts.baseline_config(splits.fitted, train_opts.dropout), init);
  } else {
    model = std::make_unique<tde::TdeModel>(
        model_opts.tde_config(splits.fitted, train_opts.dropout), init);
  }

  const auto t0 = std::chrono::steady_clock::now();
  tde::TrainResult result =
      tde::train(*model, splits.train, splits.val, train_opts.config(seed));
  manifest.timing(
      "train",
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count());

  tde::write_history_csv((dir / "history.csv").string(), result.history);
  tde::save_checkpoint((dir / "checkpoint.json").string(), *model,
                       splits.fitted);

  std::vector<double> scores = tde::score_dataset(*model, splits.test);
  tde::EvalReport report =
      tde::evaluate(scores, labels_of(splits.test), n_bootstrap, seed);
  write_text(dir / "report.json", report.to_json());

  manifest.note("best_epoch", result.best_epoch);
  manifest.note("epochs_run", result.history.size());
  manifest.note("test_auroc", report.auroc);
  manifest.write(dir);

  std::cout << "best epoch " << result.best_epoch << ", test AUROC "
            << report.auroc << ", run dir " << dir.string() << "\n";
  return 0;
}

int cmd_eval(const DataOpts& data, const std::string& model_path,
             int n_bootstrap, std::uint64_t seed, const std::string& out) {
  fs::path dir = resolve_run_dir(out, "eval");
  Manifest manifest("eval", seed);
  manifest.config({{"model", model_path}, {"bootstrap", n_bootstrap}});
  data.fingerprint(manifest);
  manifest.dataset("model", model_path);

  tde::LoadedCheckpoint ckpt = tde::load_checkpoint(model_path);
  tde::Dataset ds = align_to_checkpoint(data.load(), ckpt.schema);
  std::vector<double> scores = tde::score_dataset(*ckpt.model, ds);
  tde::EvalReport report = tde::evaluate(scores, labels_of(ds), n_bootstrap, seed);
  write_text(dir / "report.json", report.to_json());
  manifest.write(dir);
  std::cout << report.to_json();
  return 0;
}

int cmd_predict_online(const DataOpts& data, const std::string& model_path,
                       const std::string& out) {
  fs::path dir = resolve_run_dir(out, "predict-online");
  Manifest manifest("predict-online", 0);
  manifest.config({{"model", model_path}});
  data.fingerprint(manifest);

  tde::LoadedCheckpoint ckpt = tde::load_checkpoint(model_path);
  auto* model = dynamic_cast<tde::TdeModel*>(ckpt.model.get());
  if (model == nullptr) {
    throw tde::ConfigError("online prediction needs a tde checkpoint");
  }
  tde::Dataset ds = align_to_checkpoint(data.load(), ckpt.schema);

  std::ofstream csv(dir / "online_predictions.csv");
  if (!csv) throw tde::IoError("cannot write online_predictions.csv");
  csv << "instance_id,time,probability\n";
  for (const auto& inst : ds.instances) {
    for (const auto& [time, prob] : model->predict_online(inst)) {
      csv << inst.id << "," << fmt_double(time) << "," << fmt_double(prob)
          << "\n";
    }
  }
  manifest.write(dir);
  std::cout << dir.string() << "\n";
  return 0;
}

int cmd_export_emb(const DataOpts& data, const std::string& model_path,
                   const std::string& which, const std::string& out) {
  fs::path dir = resolve_run_dir(out, "export-emb");
  Manifest manifest("export-emb", 0);
  manifest.config({{"model", model_path}, {"which", which}});
  data.fingerprint(manifest);

  tde::LoadedCheckpoint ckpt = tde::load_checkpoint(model_path);
  auto* model = dynamic_cast<tde::TdeModel*>(ckpt.model.get());
  if (model == nullptr) {
    throw tde::ConfigError("embedding export needs a tde checkpoint");
  }
  tde::Dataset ds = align_to_checkpoint(data.load(), ckpt.schema);
  tde::export_embeddings(ds, *model, (dir / "embeddings.csv").string(), which);
  manifest.write(dir);
  std::cout << (dir / "embeddings.csv").string() << "\n";
  return 0;
}

int cmd_ablate(const DataOpts& data, const ModelOpts& model_opts,
               const TrainOpts& train_opts, std::uint64_t seed, int n_bootstrap,
               const std::string& out) {
  fs::path dir = resolve_run_dir(out, "ablate");
  Manifest manifest("ablate", seed);
  manifest.config({{"model", model_opts.to_json()},
                   {"train", train_opts.to_json(seed)},
                   {"bootstrap", n_bootstrap}});
  data.fingerprint(manifest);

  tde::Dataset raw = data.load();
  std::uint64_t split_seed = train_opts.split_seed ? train_opts.split_seed : seed;
  Splits splits = split_and_normalize(raw, split_seed);

  tde::TdeConfig cfg = model_opts.tde_config(splits.fitted, train_opts.dropout);
  cfg.mode = tde::AggregationMode::kAttention;
  tde::AblationReport report =
      tde::run_ablation(splits.train, splits.val, splits.test, cfg,
                        train_opts.config(seed), n_bootstrap);
  write_text(dir / "ablation.json", report.to_json());
  manifest.write(dir);
  std::cout << report.to_json();
  return 0;
}

int cmd_bench_epoch(const DataOpts& data, const ModelOpts& model_opts,
                    const TrainOpts& train_opts, std::uint64_t seed,
                    int bench_epochs, const std::string& out) {
  fs::path dir = resolve_run_dir(out, "bench-epoch");
  Manifest manifest("bench-epoch", seed);
  manifest.config({{"model", model_opts.to_json()},
                   {"train", train_opts.to_json(seed)},
                   {"bench_epochs", bench_epochs}});
  data.fingerprint(manifest);

  tde::Dataset raw = data.load();
  std::uint64_t split_seed = train_opts.split_seed ? train_opts.split_seed : seed;
  Splits splits = split_and_normalize(raw, split_seed);

  json bench;
  double means[3] = {0, 0, 0};
  const char* names[3] = {"tde-mean", "tde-attn", "gru-baseline"};
  for (int arch = 0; arch < 3; ++arch) {
    tde::Rng init(tde::Rng::derive(seed, 99));
    std::unique_ptr<tde::Model> model;
    if (arch == 0) {
      tde::TdeConfig cfg = model_opts.tde_config(splits.fitted, 0.0);
      cfg.mode = tde::AggregationMode::kMean;
      cfg.agg_dim = cfg.var_dim;
      model = std::make_unique<tde::TdeModel>(cfg, init);
    } else if (arch == 1) {
      tde::TdeConfig cfg = model_opts.tde_config(splits.fitted, 0.0);
      cfg.mode = tde::AggregationMode::kAttention;
      model = std::make_unique<tde::TdeModel>(cfg, init);
    } else {
      model = std::make_unique<tde::StructuredGruModel>(
          model_opts.baseline_config(splits.fitted, 0.0), init);
    }
    std::vector<double> secs = tde::time_epochs(
        *model, splits.train, train_opts.config(seed), bench_epochs);
    double mean = 0.0;
    for (double s : secs) mean += s;
    mean /= static_cast<double>(secs.size());
    double var = 0.0;
    for (double s : secs) var += (s - mean) * (s - mean);
    double sd = std::sqrt(var / static_cast<double>(secs.size()));
    means[arch] = mean;
    bench[names[arch]] = {{"mean_sec_per_epoch", mean},
                          {"sd_sec_per_epoch", sd},
                          {"epochs", secs}};
    std::cout << names[arch] << ": " << mean << " +/- " << sd << " s/epoch\n";
  }
  bench["ratio_tde_mean_vs_gru"] = means[0] / means[2];
  bench["ratio_tde_attn_vs_gru"] = means[1] / means[2];
  write_text(dir / "bench.json", bench.dump(2) + "\n");
  manifest.write(dir);
  std::cout << "tde-mean / gru-baseline ratio: " << means[0] / means[2] << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal dynamic embedding for irregularly sampled time "
               "series: training, evaluation and benchmarks"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "key=value config file with a [subcommand] section, e.g. "
                 "[train] then batch=32; flags override it");

  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  std::string out;
  app.add_option("--out", out,
                 "run directory (default runs/<timestamp>-<command>)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->fallthrough();
  int synth_n = 1000, synth_dims = 8;
  double synth_balance = 0.5;
  synth->add_option("--n", synth_n, "instances")->capture_default_str();
  synth->add_option("--dims", synth_dims, "variables")->capture_default_str();
  synth->add_option("--balance", synth_balance, "positive-class rate")
      ->capture_default_str();

  auto* train = app.add_subcommand(
      "train", "stratified 6:2:2 split, train with early stopping, write "
               "checkpoint + history + test report");
  train->fallthrough();
  DataOpts train_data;
  ModelOpts train_model;
  TrainOpts train_opts;
  int train_bootstrap = 1000;
  train_data.attach(train);
  train_model.attach(train, true);
  train_opts.attach(train);
  train->add_option("--split-seed", train_opts.split_seed,
                    "split seed (default: --seed)");
  train->add_option("--bootstrap", train_bootstrap, "bootstrap resamples");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->fallthrough();
  DataOpts eval_data;
  std::string eval_model;
  int eval_bootstrap = 1000;
  eval_data.attach(eval);
  eval->add_option("--model", eval_model, "checkpoint path")->required();
  eval->add_option("--bootstrap", eval_bootstrap, "bootstrap resamples");

  auto* online = app.add_subcommand(
      "predict-online", "per-timestep probabilities, past observations only");
  online->fallthrough();
  DataOpts online_data;
  std::string online_model;
  online_data.attach(online);
  online->add_option("--model", online_model, "checkpoint path")->required();

  auto* emb = app.add_subcommand("export-emb",
                                 "export local or global status embeddings");
  emb->fallthrough();
  DataOpts emb_data;
  std::string emb_model, emb_which = "global";
  emb_data.attach(emb);
  emb->add_option("--model", emb_model, "checkpoint path")->required();
  emb->add_option("--which", emb_which, "local | global")
      ->check(CLI::IsMember({"local", "global"}));

  auto* ablate = app.add_subcommand(
      "ablate", "train softmax and non-softmax attention arms, paired report");
  ablate->fallthrough();
  DataOpts ablate_data;
  ModelOpts ablate_model;
  TrainOpts ablate_opts;
  int ablate_bootstrap = 1000;
  ablate_data.attach(ablate);
  ablate_model.attach(ablate, false);
  ablate_opts.attach(ablate);
  ablate->add_option("--split-seed", ablate_opts.split_seed,
                     "split seed (default: --seed)");
  ablate->add_option("--bootstrap", ablate_bootstrap, "bootstrap resamples");

  auto* bench = app.add_subcommand(
      "bench-epoch", "seconds/epoch for tde-mean, tde-attn and gru-baseline");
  bench->fallthrough();
  DataOpts bench_data;
  ModelOpts bench_model;
  TrainOpts bench_opts;
  int bench_epochs = 3;
  bench_data.attach(bench);
  bench_model.attach(bench, false);
  bench_opts.attach(bench);
  bench->add_option("--bench-epochs", bench_epochs, "epochs to time")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return cmd_synth(out, synth_n, synth_dims, synth_balance, seed);
    }
    if (train->parsed()) {
      return cmd_train(train_data, train_model, train_opts, seed,
                       train_bootstrap, out);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_data, eval_model, eval_bootstrap, seed, out);
    }
    if (online->parsed()) {
      return cmd_predict_online(online_data, online_model, out);
    }
    if (emb->parsed()) {
      return cmd_export_emb(emb_data, emb_model, emb_which, out);
    }
    if (ablate->parsed()) {
      return cmd_ablate(ablate_data, ablate_model, ablate_opts, seed,
                        ablate_bootstrap, out);
    }
    if (bench->parsed()) {
      return cmd_bench_epoch(bench_data, bench_model, bench_opts, seed,
                             bench_epochs, out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
