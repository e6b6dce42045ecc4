#include "tde/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "tde/errors.hpp"
#include "tde/rng.hpp"

namespace tde {

namespace {

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  return s.substr(b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(field);
  for (auto& f : out) f = trim(f);
  return out;
}

double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw DataError("cannot parse number '" + s + "' in " + context);
  }
  return v;
}

long parse_long(const std::string& s, const std::string& context) {
  long v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw DataError("cannot parse integer '" + s + "' in " + context);
  }
  return v;
}

std::string format_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

constexpr const char* kStaticPrefix = "static:";

bool has_static_prefix(const std::string& name) {
  return name.rfind(kStaticPrefix, 0) == 0;
}

// Index of a (possibly categorical) variable after expansion. Categorical
// variables occupy one slot per category, in sorted category order, at the
// position where the declared variable sits.
struct ExpandedTable {
  std::vector<VariableDef> defs;
  // declared variable -> {category -> expanded index}; numerical variables
  // use the single empty-string key.
  std::unordered_map<std::string, std::map<std::string, int>> index;

  int resolve(const std::string& var, const std::string& value_token,
              bool categorical, double* out_value,
              const std::string& context) const {
    auto it = index.find(var);
    if (it == index.end()) {
      throw SchemaError("unknown variable '" + var + "' in " + context);
    }
    if (!categorical) {
      *out_value = parse_double(value_token, context);
      return it->second.begin()->second;
    }
    auto cat = it->second.find(value_token);
    if (cat == it->second.end()) {
      throw SchemaError("unknown category '" + value_token +
                        "' for variable '" + var + "' in " + context);
    }
    *out_value = 1.0;
    return cat->second;
  }
};

ExpandedTable expand(const std::vector<SchemaSpec::Var>& declared,
                     const std::map<std::string, std::set<std::string>>&
                         observed_categories) {
  ExpandedTable table;
  for (const auto& var : declared) {
    if (!var.categorical) {
      VariableDef def;
      def.name = var.name;
      def.kind = VarKind::kNumerical;
      table.index[var.name][""] = static_cast<int>(table.defs.size());
      table.defs.push_back(std::move(def));
      continue;
    }
    std::set<std::string> cats(var.categories.begin(), var.categories.end());
    if (cats.empty()) {
      auto it = observed_categories.find(var.name);
      if (it != observed_categories.end()) cats = it->second;
    }
    if (cats.empty()) {
      throw SchemaError("categorical variable '" + var.name +
                        "' has no declared or observed categories");
    }
    for (const auto& c : cats) {
      VariableDef def;
      def.name = var.name + "=" + c;
      def.kind = VarKind::kIndicator;
      table.index[var.name][c] = static_cast<int>(table.defs.size());
      table.defs.push_back(std::move(def));
    }
  }
  return table;
}

struct RawEvent {
  std::string instance;
  bool is_static;
  double time;
  std::string variable;  // static prefix stripped
  std::string value;
  long line_no;
};

}  // namespace

SchemaSpec load_schema_spec(const std::string& path) {
  std::ifstream in = open_for_read(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema file " + path + ": " + e.what());
  }
  SchemaSpec spec;
  auto read_vars = [&](const char* key) {
    std::vector<SchemaSpec::Var> out;
    if (!j.contains(key)) return out;
    for (const auto& v : j.at(key)) {
      SchemaSpec::Var var;
      var.name = v.at("name").get<std::string>();
      var.categorical = v.value("categorical", false);
      if (v.contains("categories")) {
        for (const auto& c : v.at("categories"))
          var.categories.push_back(c.get<std::string>());
      }
      out.push_back(std::move(var));
    }
    return out;
  };
  spec.variables = read_vars("variables");
  spec.statics = read_vars("statics");
  spec.n_classes = j.value("classes", 0);
  if (spec.variables.empty()) {
    throw SchemaError("schema file " + path + " declares no variables");
  }
  return spec;
}

SchemaSpec schema_spec_of(const Schema& schema) {
  SchemaSpec spec;
  for (const auto& def : schema.variables)
    spec.variables.push_back({def.name, false, {}});
  for (const auto& def : schema.statics)
    spec.statics.push_back({def.name, false, {}});
  spec.n_classes = schema.n_classes;
  return spec;
}

Dataset load_events(const std::string& events_path,
                    const std::string& labels_path,
                    const std::optional<SchemaSpec>& maybe_spec) {
  // Labels first; their file order defines instance order.
  std::ifstream labels_in = open_for_read(labels_path);
  std::string line;
  if (!std::getline(labels_in, line) ||
      split_csv_line(line) != std::vector<std::string>{"instance_id", "label"}) {
    throw DataError("labels file " + labels_path +
                    ": expected header 'instance_id,label'");
  }
  std::vector<std::string> order;
  std::unordered_map<std::string, int> labels;
  long line_no = 1;
  while (std::getline(labels_in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2) {
      throw DataError(labels_path + ":" + std::to_string(line_no) +
                      ": expected 2 fields");
    }
    long label = parse_long(fields[1], labels_path);
    if (label < 0) {
      throw DataError(labels_path + ":" + std::to_string(line_no) +
                      ": negative label");
    }
    if (!labels.emplace(fields[0], static_cast<int>(label)).second) {
      throw DataError(labels_path + ": duplicate instance '" + fields[0] + "'");
    }
    order.push_back(fields[0]);
  }

  // Scan events once into raw rows, validating the ingestion contract.
  std::ifstream events_in = open_for_read(events_path);
  if (!std::getline(events_in, line) ||
      split_csv_line(line) !=
          std::vector<std::string>{"instance_id", "time", "variable", "value"}) {
    throw DataError("events file " + events_path +
                    ": expected header 'instance_id,time,variable,value'");
  }
  std::vector<RawEvent> rows;
  std::unordered_map<std::string, double> last_time;
  std::map<std::string, std::set<std::string>> series_names_seen;
  std::map<std::string, std::set<std::string>> static_names_seen;
  line_no = 1;
  while (std::getline(events_in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw DataError(events_path + ":" + std::to_string(line_no) +
                      ": expected 4 fields");
    }
    const std::string ctx = events_path + ":" + std::to_string(line_no);
    RawEvent ev;
    ev.instance = fields[0];
    ev.line_no = line_no;
    ev.value = fields[3];
    if (!labels.count(ev.instance)) {
      throw DataError(ctx + ": instance '" + ev.instance +
                      "' appears in events but not in labels");
    }
    const bool prefixed = has_static_prefix(fields[2]);
    const bool timeless = fields[1].empty();
    if (prefixed != timeless) {
      throw DataError(ctx + ": static rows need both an empty time and a '" +
                      kStaticPrefix + "' variable prefix");
    }
    ev.is_static = prefixed;
    if (ev.is_static) {
      ev.time = 0.0;
      ev.variable = fields[2].substr(std::string(kStaticPrefix).size());
      static_names_seen[ev.variable];
    } else {
      ev.time = parse_double(fields[1], ctx);
      if (!std::isfinite(ev.time) || ev.time < 0.0) {
        throw DataError(ctx + ": time must be finite and non-negative");
      }
      auto [it, fresh] = last_time.emplace(ev.instance, ev.time);
      if (!fresh) {
        if (ev.time < it->second) {
          throw DataError(ctx + ": observations of instance '" + ev.instance +
                          "' are not time-sorted");
        }
        it->second = ev.time;
      }
      ev.variable = fields[2];
      series_names_seen[ev.variable];
    }
    rows.push_back(std::move(ev));
  }

  // Resolve the schema: declared spec wins, otherwise infer every observed
  // name as a numerical variable in lexicographic order.
  SchemaSpec spec;
  if (maybe_spec) {
    spec = *maybe_spec;
  } else {
    for (const auto& [name, _] : series_names_seen) {
      spec.variables.push_back({name, false, {}});
    }
    for (const auto& [name, _] : static_names_seen) {
      spec.statics.push_back({name, false, {}});
    }
  }

  // Collect observed categories for categorical variables lacking a declared
  // category list.
  std::map<std::string, std::set<std::string>> observed_series_cats;
  std::map<std::string, std::set<std::string>> observed_static_cats;
  {
    std::set<std::string> categorical_series, categorical_statics;
    for (const auto& v : spec.variables)
      if (v.categorical) categorical_series.insert(v.name);
    for (const auto& v : spec.statics)
      if (v.categorical) categorical_statics.insert(v.name);
    for (const auto& ev : rows) {
      if (!ev.is_static && categorical_series.count(ev.variable))
        observed_series_cats[ev.variable].insert(ev.value);
      if (ev.is_static && categorical_statics.count(ev.variable))
        observed_static_cats[ev.variable].insert(ev.value);
    }
  }

  ExpandedTable series = expand(spec.variables, observed_series_cats);
  ExpandedTable statics = expand(spec.statics, observed_static_cats);

  std::unordered_map<std::string, bool> declared_categorical;
  for (const auto& v : spec.variables) declared_categorical[v.name] = v.categorical;
  std::unordered_map<std::string, bool> declared_static_categorical;
  for (const auto& v : spec.statics)
    declared_static_categorical[v.name] = v.categorical;

  Dataset ds;
  ds.schema.variables = series.defs;
  ds.schema.statics = statics.defs;

  int max_label = 0;
  for (const auto& [_, l] : labels) max_label = std::max(max_label, l);
  ds.schema.n_classes = spec.n_classes > 0 ? spec.n_classes : max_label + 1;
  for (const auto& [id, l] : labels) {
    if (l >= ds.schema.n_classes) {
      throw DataError("label " + std::to_string(l) + " of instance '" + id +
                      "' exceeds declared class count");
    }
  }

  std::unordered_map<std::string, std::size_t> slot;
  ds.instances.reserve(order.size());
  for (const auto& id : order) {
    Instance inst;
    inst.id = id;
    inst.label = labels.at(id);
    slot[id] = ds.instances.size();
    ds.instances.push_back(std::move(inst));
  }

  for (const auto& ev : rows) {
    const std::string ctx = events_path + ":" + std::to_string(ev.line_no);
    Instance& inst = ds.instances[slot.at(ev.instance)];
    double value = 0.0;
    if (ev.is_static) {
      auto decl = declared_static_categorical.find(ev.variable);
      if (decl == declared_static_categorical.end()) {
        throw SchemaError("unknown static variable '" + ev.variable + "' in " +
                          ctx);
      }
      int idx = statics.resolve(ev.variable, ev.value, decl->second, &value, ctx);
      for (const auto& [existing, _] : inst.statics) {
        if (existing == idx) {
          throw DataError(ctx + ": duplicate static '" + ev.variable + "'");
        }
      }
      inst.statics.emplace_back(idx, value);
    } else {
      auto decl = declared_categorical.find(ev.variable);
      if (decl == declared_categorical.end()) {
        throw SchemaError("unknown variable '" + ev.variable + "' in " + ctx);
      }
      int idx = series.resolve(ev.variable, ev.value, decl->second, &value, ctx);
      if (!std::isfinite(value)) {
        throw DataError(ctx + ": non-finite value");
      }
      if (!inst.observations.empty()) {
        for (auto it = inst.observations.rbegin();
             it != inst.observations.rend() && it->time == ev.time; ++it) {
          if (it->variable == idx) {
            throw DataError(ctx + ": duplicate (time, variable) pair");
          }
        }
      }
      inst.observations.push_back({ev.time, value, idx});
    }
  }

  for (auto& inst : ds.instances) {
    std::sort(inst.statics.begin(), inst.statics.end());
    if (inst.observations.empty() && inst.statics.empty()) {
      throw DataError("instance '" + inst.id +
                      "' has no observations and no statics");
    }
  }
  return ds;
}

void save_events(const Dataset& ds, const std::string& events_path,
                 const std::string& labels_path) {
  std::ofstream ev(events_path);
  if (!ev) throw IoError("cannot write " + events_path);
  ev << "instance_id,time,variable,value\n";
  for (const auto& inst : ds.instances) {
    for (const auto& [idx, value] : inst.statics) {
      ev << inst.id << ",," << kStaticPrefix
         << ds.schema.statics[static_cast<std::size_t>(idx)].name << ","
         << format_double(value) << "\n";
    }
    for (const auto& obs : inst.observations) {
      ev << inst.id << "," << format_double(obs.time) << ","
         << ds.schema.variables[static_cast<std::size_t>(obs.variable)].name
         << "," << format_double(obs.value) << "\n";
    }
  }
  if (!ev.good()) throw IoError("write failure on " + events_path);

  std::ofstream lb(labels_path);
  if (!lb) throw IoError("cannot write " + labels_path);
  lb << "instance_id,label\n";
  for (const auto& inst : ds.instances) {
    lb << inst.id << "," << inst.label << "\n";
  }
  if (!lb.good()) throw IoError("write failure on " + labels_path);
}

// ---------------------------------------------------------------------------

namespace {

void fit_table(std::vector<VariableDef>& defs,
               const std::vector<std::vector<double>>& samples) {
  for (std::size_t i = 0; i < defs.size(); ++i) {
    VariableDef& def = defs[i];
    if (def.kind == VarKind::kIndicator) continue;
    const auto& xs = samples[i];
    if (xs.empty()) {
      def.mean = 0.0;
      def.stddev = 1.0;
      def.constant = true;
      continue;
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    def.mean = mean;
    double sd = std::sqrt(var);
    if (sd > 0.0) {
      def.stddev = sd;
      def.constant = false;
    } else {
      def.stddev = 1.0;  // degenerate variance: value maps to exactly 0
      def.constant = true;
    }
  }
}

}  // namespace

Schema fit_normalizer(const Dataset& train) {
  Schema fitted = train.schema;
  std::vector<std::vector<double>> series(fitted.variables.size());
  std::vector<std::vector<double>> statics(fitted.statics.size());
  for (const auto& inst : train.instances) {
    for (const auto& obs : inst.observations)
      series[static_cast<std::size_t>(obs.variable)].push_back(obs.value);
    for (const auto& [idx, value] : inst.statics)
      statics[static_cast<std::size_t>(idx)].push_back(value);
  }
  fit_table(fitted.variables, series);
  fit_table(fitted.statics, statics);
  fitted.normalizer_fitted = true;
  return fitted;
}

Dataset apply_normalizer(const Dataset& ds, const Schema& fitted) {
  if (!fitted.normalizer_fitted) {
    throw StateError("apply_normalizer called with unfitted schema");
  }
  if (fitted.variables.size() != ds.schema.variables.size() ||
      fitted.statics.size() != ds.schema.statics.size()) {
    throw SchemaError("normalizer schema does not match dataset schema");
  }
  Dataset out = ds;
  out.schema = fitted;
  for (auto& inst : out.instances) {
    for (auto& obs : inst.observations) {
      const auto& def = fitted.variables[static_cast<std::size_t>(obs.variable)];
      if (def.kind == VarKind::kNumerical) {
        obs.value = (obs.value - def.mean) / def.stddev;
      }
    }
    for (auto& [idx, value] : inst.statics) {
      const auto& def = fitted.statics[static_cast<std::size_t>(idx)];
      if (def.kind == VarKind::kNumerical) {
        value = (value - def.mean) / def.stddev;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

StructuredGrid discretize(const Instance& inst, int n_variables,
                          double bin_hours, double horizon_hours) {
  if (bin_hours <= 0.0) throw ConfigError("bin width must be positive");
  if (horizon_hours <= 0.0) throw ConfigError("horizon must be positive");
  StructuredGrid grid;
  grid.bin_hours = bin_hours;
  grid.n_variables = n_variables;
  grid.n_bins = std::max(1, static_cast<int>(std::ceil(horizon_hours / bin_hours)));
  const std::size_t cells =
      static_cast<std::size_t>(grid.n_bins) * static_cast<std::size_t>(n_variables);
  grid.values.assign(cells, 0.0);
  grid.mask.assign(cells, 0);
  std::vector<int> counts(cells, 0);
  for (const auto& obs : inst.observations) {
    if (obs.time > horizon_hours) continue;
    int bin = std::min(static_cast<int>(obs.time / bin_hours), grid.n_bins - 1);
    std::size_t cell = static_cast<std::size_t>(bin) * n_variables +
                       static_cast<std::size_t>(obs.variable);
    grid.values[cell] += obs.value;
    counts[cell] += 1;
  }
  for (std::size_t i = 0; i < cells; ++i) {
    if (counts[i] > 0) {
      grid.values[i] /= counts[i];
      grid.mask[i] = 1;
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------

SplitResult split(const Dataset& ds, double train_ratio, double val_ratio,
                  double test_ratio, std::uint64_t seed) {
  const double ratios[3] = {train_ratio, val_ratio, test_ratio};
  double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || ratios[0] <= 0 || ratios[1] <= 0 ||
      ratios[2] <= 0) {
    throw ConfigError("split ratios must be positive and sum to 1");
  }

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    by_class[ds.instances[i].label].push_back(i);
  }
  std::vector<int> assignment(ds.instances.size(), 0);
  for (auto& [label, members] : by_class) {
    if (members.size() < 3) {
      throw DataError("class " + std::to_string(label) + " has only " +
                      std::to_string(members.size()) +
                      " members, fewer than the 3 splits");
    }
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(label)));
    rng.shuffle(members);

    // Largest-remainder apportionment keeps per-class proportions within one
    // instance of the stratified target.
    const double n = static_cast<double>(members.size());
    std::size_t counts[3];
    double fracs[3];
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      double exact = n * ratios[s];
      counts[s] = static_cast<std::size_t>(exact);
      fracs[s] = exact - static_cast<double>(counts[s]);
      assigned += counts[s];
    }
    while (assigned < members.size()) {
      int best = 0;
      for (int s = 1; s < 3; ++s)
        if (fracs[s] > fracs[best]) best = s;
      counts[best] += 1;
      fracs[best] = -1.0;
      ++assigned;
    }
    std::size_t cursor = 0;
    for (int s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < counts[s]; ++k) {
        assignment[members[cursor++]] = s;
      }
    }
  }

  SplitResult result;
  result.train.schema = ds.schema;
  result.val.schema = ds.schema;
  result.test.schema = ds.schema;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    switch (assignment[i]) {
      case 0: result.train.instances.push_back(ds.instances[i]); break;
      case 1: result.val.instances.push_back(ds.instances[i]); break;
      default: result.test.instances.push_back(ds.instances[i]); break;
    }
  }
  return result;
}

}  // namespace tde
