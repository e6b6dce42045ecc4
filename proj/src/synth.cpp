#include "tde/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tde/errors.hpp"
#include "tde/rng.hpp"

namespace tde {

namespace {

constexpr double kHorizonHours = 48.0;
constexpr double kVisitRate = 7.0;  // visits = 1 + Poisson(kVisitRate)
constexpr double kObserveP = 0.5;   // per-visit presence of any variable
// The rate variable is re-measured in short bursts a few minutes apart;
// burst size is 1 + Poisson(b), so expected counts differ 2x by class while
// presence probability stays identical.
constexpr double kBurst0 = 0.4;
constexpr double kBurst1 = 1.8;
constexpr double kBurstStepHours = 0.03;
constexpr double kValueShift = 0.5;
constexpr double kTwoPi = 6.283185307179586476925286766559;

double signal(int var, double t, int label) {
  switch (var) {
    case 1:
      return kValueShift * label + 0.35 * std::sin(kTwoPi * t / kHorizonHours);
    case 2:
      return -kValueShift * label + 0.4 * (t / kHorizonHours);
    default:
      return 0.0;
  }
}

double base_of(int var) { return 60.0 + 9.0 * var; }
double scale_of(int var) { return 1.0 + static_cast<double>(var % 4); }

Instance draw_instance(int index, int label, int n_variables, Rng& rng) {
  Instance inst;
  char id[24];
  std::snprintf(id, sizeof(id), "synth-%05d", index);
  inst.id = id;
  inst.label = label;

  while (inst.observations.empty()) {
    int visits = 1 + rng.poisson(kVisitRate);
    std::vector<double> times;
    while (static_cast<int>(times.size()) < visits) {
      times.clear();
      for (int v = 0; v < visits; ++v)
        times.push_back(rng.uniform(0.0, kHorizonHours));
      std::sort(times.begin(), times.end());
      // Coincident visit times are astronomically unlikely but would break
      // the duplicate-(time,variable) invariant; redraw if they occur.
      if (std::adjacent_find(times.begin(), times.end()) != times.end())
        times.clear();
    }
    for (double t : times) {
      for (int d = 0; d < n_variables; ++d) {
        if (!rng.bernoulli(kObserveP)) continue;
        int repeats =
            (d == 0) ? 1 + rng.poisson(label == 1 ? kBurst1 : kBurst0) : 1;
        for (int r = 0; r < repeats; ++r) {
          double tr = t + r * kBurstStepHours;
          if (tr > kHorizonHours) break;
          double raw =
              base_of(d) + scale_of(d) * (signal(d, tr, label) + rng.normal());
          inst.observations.push_back({tr, raw, d});
        }
      }
    }
    std::stable_sort(inst.observations.begin(), inst.observations.end(),
                     [](const Observation& a, const Observation& b) {
                       return a.time < b.time;
                     });
    // A later visit could collide with a burst offset; keep the invariant by
    // redrawing the instance in that rare case.
    for (std::size_t i = 1; i < inst.observations.size(); ++i) {
      if (inst.observations[i].time == inst.observations[i - 1].time &&
          inst.observations[i].variable == inst.observations[i - 1].variable) {
        inst.observations.clear();
        break;
      }
    }
  }

  inst.statics.emplace_back(0, 58.0 + 3.0 * label + 10.0 * rng.normal());
  inst.statics.emplace_back(1, rng.bernoulli(0.5) ? 1.0 : 0.0);
  return inst;
}

}  // namespace

Dataset synth_generate(const SynthConfig& cfg) {
  if (cfg.n_variables < 4) {
    throw ConfigError("synthetic generator needs at least 4 variables");
  }
  if (cfg.class_balance <= 0.0 || cfg.class_balance >= 1.0) {
    throw ConfigError("class balance must lie strictly inside (0, 1)");
  }
  if (cfg.n_instances < 1) {
    throw ConfigError("need at least one instance");
  }

  Dataset ds;
  for (int d = 0; d < cfg.n_variables; ++d) {
    VariableDef def;
    char name[8];
    std::snprintf(name, sizeof(name), "v%02d", d);
    def.name = name;
    ds.schema.variables.push_back(std::move(def));
  }
  ds.schema.statics.push_back({"age", VarKind::kNumerical, 0.0, 1.0, false});
  ds.schema.statics.push_back({"sex", VarKind::kNumerical, 0.0, 1.0, false});
  ds.schema.n_classes = 2;

  ds.instances.reserve(static_cast<std::size_t>(cfg.n_instances));
  for (int i = 0; i < cfg.n_instances; ++i) {
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(i)));
    int label = rng.bernoulli(cfg.class_balance) ? 1 : 0;
    ds.instances.push_back(draw_instance(i, label, cfg.n_variables, rng));
  }
  return ds;
}

}  // namespace tde
