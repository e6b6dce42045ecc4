#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tde {

struct EvalReport {
  double auroc = 0.0;
  double auprc = 0.0;
  std::pair<double, double> auroc_ci{0.0, 0.0};
  std::pair<double, double> auprc_ci{0.0, 0.0};
  int n_bootstrap = 0;
  int n_instances = 0;
  double positive_rate = 0.0;

  std::string to_json() const;  // exact field names, deterministic layout
};

// Mann-Whitney AUROC with the 0.5-credit tie convention, computed exactly by
// rank sums. Both classes must be present.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Average precision: sum of (R_k - R_{k-1}) * P_k over distinct thresholds
// in descending score order. At least one positive required.
double auprc(std::span<const double> scores, std::span<const int> labels);

// Percentile bootstrap interval of `metric` over n_bootstrap resamples with
// replacement. Resamples that lack a class are redrawn (bounded retries).
// Each resample draws from an independent stream derived from `seed`, so the
// interval is identical no matter how the loop is scheduled.
using MetricFn = double (*)(std::span<const double>, std::span<const int>);
std::pair<double, double> bootstrap_ci(std::span<const double> scores,
                                       std::span<const int> labels,
                                       MetricFn metric, int n_bootstrap,
                                       std::uint64_t seed, double level = 0.95);

// Point estimates plus both bootstrap intervals in one report.
EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    int n_bootstrap, std::uint64_t seed);

}  // namespace tde
