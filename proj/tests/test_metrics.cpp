#include "tde/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "tde/errors.hpp"
#include "tde/rng.hpp"

using namespace tde;

namespace {

// Random score/label sets with both classes present.
void random_case(Rng& rng, int n, std::vector<double>& scores,
                 std::vector<int>& labels, double tie_prob = 0.3) {
  scores.resize(static_cast<std::size_t>(n));
  labels.resize(static_cast<std::size_t>(n));
  do {
    for (int i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] = rng.bernoulli(0.3) ? 1 : 0;
      // Coarse grid scores produce plenty of ties.
      if (rng.bernoulli(tie_prob)) {
        scores[static_cast<std::size_t>(i)] =
            static_cast<double>(rng.uniform_index(5)) / 4.0;
      } else {
        scores[static_cast<std::size_t>(i)] = rng.uniform();
      }
    }
  } while (std::count(labels.begin(), labels.end(), 1) == 0 ||
           std::count(labels.begin(), labels.end(), 0) == 0);
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("auroc fixed points") {
  std::vector<double> s1 = {0.9, 0.8, 0.1, 0.2};
  std::vector<int> l1 = {1, 1, 0, 0};
  CHECK(auroc(s1, l1) == 1.0);

  std::vector<double> s2 = {0.5, 0.5, 0.5, 0.5};
  std::vector<int> l2 = {1, 0, 1, 0};
  CHECK(auroc(s2, l2) == 0.5);

  std::vector<double> s3 = {0.1, 0.2};
  std::vector<int> l3 = {1, 1};
  CHECK_THROWS_AS((void)auroc(s3, l3), MetricError);
}

TEST_CASE("auroc equals the pairwise oracle exactly") {
  Rng rng(61);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 4 + static_cast<int>(rng.uniform_index(97));
    std::vector<double> scores;
    std::vector<int> labels;
    random_case(rng, n, scores, labels);
    CHECK(auroc(scores, labels) == oracle::auroc_pairs(scores, labels));
  }
}

TEST_CASE("auroc ranking invariances") {
  Rng rng(67);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> scores;
    std::vector<int> labels;
    random_case(rng, 30, scores, labels, 0.0);  // tie-free

    double base = auroc(scores, labels);

    // Strictly increasing transform.
    std::vector<double> warped(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      warped[i] = std::exp(3.0 * scores[i]) + 7.0;
    CHECK(auroc(warped, labels) == base);

    // Score negation flips the ranking.
    std::vector<double> negated(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) negated[i] = -scores[i];
    CHECK(auroc(negated, labels) + base == 1.0);
  }
}

TEST_CASE("auprc fixed points") {
  std::vector<double> s1 = {0.2, 0.9, 0.5};
  std::vector<int> l1 = {1, 1, 1};
  CHECK(auprc(s1, l1) == 1.0);

  // One positive ranked first of 10.
  std::vector<double> s2 = {10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  std::vector<int> l2 = {1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK(auprc(s2, l2) == 1.0);

  std::vector<double> s3 = {0.5, 0.6};
  std::vector<int> l3 = {0, 0};
  CHECK_THROWS_AS((void)auprc(s3, l3), MetricError);
}

TEST_CASE("auprc equals the threshold-sweep oracle exactly") {
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 4 + static_cast<int>(rng.uniform_index(97));
    std::vector<double> scores;
    std::vector<int> labels;
    random_case(rng, n, scores, labels);
    CHECK(auprc(scores, labels) == oracle::auprc_thresholds(scores, labels));
  }
}

TEST_CASE("auprc bounds") {
  Rng rng(73);
  // All positives ranked first: area is 1 >= positive rate.
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    labels.push_back(i < 10 ? 1 : 0);
    scores.push_back(i < 10 ? 100.0 - i : 50.0 - i);
  }
  CHECK(auprc(scores, labels) == 1.0);
  CHECK(auprc(scores, labels) >= 0.25);

  // Random scores hover near the positive rate.
  scores.clear();
  labels.clear();
  for (int i = 0; i < 2000; ++i) {
    labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
    scores.push_back(rng.uniform());
  }
  double rate = static_cast<double>(std::count(labels.begin(), labels.end(), 1)) /
                static_cast<double>(labels.size());
  CHECK(std::abs(auprc(scores, labels) - rate) < 0.05);
}

TEST_CASE("bootstrap interval behavior") {
  Rng rng(79);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
    scores.push_back(labels.back() == 1 ? rng.normal(0.8, 0.5)
                                        : rng.normal(0.0, 0.5));
  }

  SUBCASE("constant metric collapses the interval") {
    MetricFn constant = [](std::span<const double>, std::span<const int>) {
      return 0.37;
    };
    auto [lo, hi] = bootstrap_ci(scores, labels, constant, 200, 5);
    CHECK(lo == 0.37);
    CHECK(hi == 0.37);
  }
  SUBCASE("same seed gives the identical interval") {
    auto a = bootstrap_ci(scores, labels, &auroc, 200, 11);
    auto b = bootstrap_ci(scores, labels, &auroc, 200, 11);
    CHECK(a == b);
  }
  SUBCASE("interval covers the point estimate") {
    double point = auroc(scores, labels);
    auto [lo, hi] = bootstrap_ci(scores, labels, &auroc, 500, 13);
    CHECK(lo <= point);
    CHECK(point <= hi);
    CHECK(lo < hi);
  }
  SUBCASE("too few resamples rejected") {
    CHECK_THROWS_AS((void)bootstrap_ci(scores, labels, &auroc, 50, 1),
                    ConfigError);
  }
}

TEST_CASE("evaluate emits the full report with ordered intervals") {
  Rng rng(83);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 150; ++i) {
    labels.push_back(rng.bernoulli(0.25) ? 1 : 0);
    scores.push_back(labels.back() == 1 ? rng.normal(1.0, 1.0)
                                        : rng.normal(0.0, 1.0));
  }
  EvalReport r = evaluate(scores, labels, 200, 3);
  CHECK(r.auroc_ci.first <= r.auroc);
  CHECK(r.auroc <= r.auroc_ci.second);
  CHECK(r.auprc_ci.first <= r.auprc);
  CHECK(r.auprc <= r.auprc_ci.second);
  CHECK(r.n_instances == 150);
  CHECK(r.n_bootstrap == 200);

  std::string json = r.to_json();
  for (const char* field :
       {"\"auroc\"", "\"auprc\"", "\"auroc_ci\"", "\"auprc_ci\"",
        "\"n_bootstrap\"", "\"n_instances\"", "\"positive_rate\""}) {
    CHECK(json.find(field) != std::string::npos);
  }
  // Determinism down to the byte.
  CHECK(json == evaluate(scores, labels, 200, 3).to_json());
}

TEST_SUITE_END();
