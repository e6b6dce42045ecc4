#include "tde/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "tde/errors.hpp"
#include "tde/parallel.hpp"
#include "tde/rng.hpp"

namespace tde {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw MetricError("scores and labels must be non-empty and equally sized");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw MetricError("non-finite score");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw MetricError("labels must be binary");
  }
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += static_cast<std::size_t>(l);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw MetricError("auroc needs both classes present");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Rank sum of positives with average ranks over ties; equal to the
  // pairwise count wins + 0.5*ties by the Mann-Whitney identity.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += static_cast<std::size_t>(l);
  if (n_pos == 0) throw MetricError("auprc needs at least one positive");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  // Average precision over distinct thresholds, descending; ties enter as
  // one group so precision is evaluated only at realizable cutoffs.
  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) ++tp;
      else ++fp;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

std::pair<double, double> bootstrap_ci(std::span<const double> scores,
                                       std::span<const int> labels,
                                       MetricFn metric, int n_bootstrap,
                                       std::uint64_t seed, double level) {
  check_inputs(scores, labels);
  if (n_bootstrap < 100) {
    throw ConfigError("bootstrap needs at least 100 resamples");
  }
  if (level <= 0.0 || level >= 1.0) {
    throw ConfigError("confidence level must lie inside (0, 1)");
  }
  const std::size_t n = scores.size();
  constexpr int kMaxRetries = 1000;

  std::vector<double> stats(static_cast<std::size_t>(n_bootstrap));
  bool failed = false;

#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (int b = 0; b < n_bootstrap; ++b) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(b)));
    std::vector<double> rs(n);
    std::vector<int> rl(n);
    bool ok = false;
    for (int attempt = 0; attempt < kMaxRetries && !ok; ++attempt) {
      bool has_pos = false, has_neg = false;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t pick = static_cast<std::size_t>(rng.uniform_index(n));
        rs[i] = scores[pick];
        rl[i] = labels[pick];
        has_pos |= (rl[i] == 1);
        has_neg |= (rl[i] == 0);
      }
      ok = has_pos && has_neg;
    }
    if (!ok) {
#pragma omp critical
      failed = true;
    } else {
      stats[static_cast<std::size_t>(b)] = metric(rs, rl);
    }
  }
  if (failed) {
    throw MetricError("bootstrap retry bound exceeded; class too rare");
  }

  std::sort(stats.begin(), stats.end());
  const double alpha = 1.0 - level;
  auto clamp_idx = [&](long idx) {
    return static_cast<std::size_t>(
        std::clamp<long>(idx, 0, n_bootstrap - 1));
  };
  const std::size_t lo =
      clamp_idx(static_cast<long>(std::floor(alpha / 2.0 * n_bootstrap)));
  const std::size_t hi =
      clamp_idx(static_cast<long>(std::ceil((1.0 - alpha / 2.0) * n_bootstrap)) - 1);
  return {stats[lo], stats[hi]};
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    int n_bootstrap, std::uint64_t seed) {
  EvalReport report;
  report.auroc = auroc(scores, labels);
  report.auprc = auprc(scores, labels);
  report.auroc_ci = bootstrap_ci(scores, labels, &auroc, n_bootstrap, seed);
  report.auprc_ci =
      bootstrap_ci(scores, labels, &auprc, n_bootstrap, Rng::derive(seed, 1));
  report.n_bootstrap = n_bootstrap;
  report.n_instances = static_cast<int>(labels.size());
  double pos = 0.0;
  for (int l : labels) pos += l;
  report.positive_rate = pos / static_cast<double>(labels.size());
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["auroc"] = auroc;
  j["auprc"] = auprc;
  j["auroc_ci"] = {auroc_ci.first, auroc_ci.second};
  j["auprc_ci"] = {auprc_ci.first, auprc_ci.second};
  j["n_bootstrap"] = n_bootstrap;
  j["n_instances"] = n_instances;
  j["positive_rate"] = positive_rate;
  return j.dump(2) + "\n";
}

}  // namespace tde
