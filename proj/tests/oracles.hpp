#pragma once

// Reference implementations used only by tests. Each is a plain scalar loop
// written directly from the defining formula, independent of the library's
// code paths, so the two sides of every comparison cannot share a bug.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <vector>

namespace oracle {

// Triple-loop matrix product: {m,k} x {k,n} row-major.
inline std::vector<double> matmul(const std::vector<double>& a, int m, int k,
                                  const std::vector<double>& b, int n) {
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < k; ++p)
        out[static_cast<std::size_t>(i) * n + j] +=
            a[static_cast<std::size_t>(i) * k + p] *
            b[static_cast<std::size_t>(p) * n + j];
  return out;
}

// Per-row scalar accumulation (axis=1 reduction of an {m,n} matrix).
inline std::vector<double> row_sums(const std::vector<double>& a, int m,
                                    int n) {
  std::vector<double> out(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(i)] += a[static_cast<std::size_t>(i) * n + j];
  return out;
}

// Direct exp/normalize, no stabilization.
inline std::vector<double> softmax_direct(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i]);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

// One GRU cell step, scalar loops straight from the update equations.
struct GruWeights {
  std::vector<double> w_r, w_z, w_h;  // hidden x input
  std::vector<double> u_r, u_z, u_h;  // hidden x hidden
  std::vector<double> b_r, b_z, b_h;  // hidden
};

inline std::vector<double> gru_step(const GruWeights& w,
                                    const std::vector<double>& h_prev,
                                    const std::vector<double>& s,
                                    int hidden, int input) {
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> r(hidden), z(hidden), hc(hidden), h(hidden);
  for (int i = 0; i < hidden; ++i) {
    double ar = w.b_r[i], az = w.b_z[i];
    for (int j = 0; j < input; ++j) {
      ar += w.w_r[static_cast<std::size_t>(i) * input + j] * s[j];
      az += w.w_z[static_cast<std::size_t>(i) * input + j] * s[j];
    }
    for (int j = 0; j < hidden; ++j) {
      ar += w.u_r[static_cast<std::size_t>(i) * hidden + j] * h_prev[j];
      az += w.u_z[static_cast<std::size_t>(i) * hidden + j] * h_prev[j];
    }
    r[i] = sig(ar);
    z[i] = sig(az);
  }
  for (int i = 0; i < hidden; ++i) {
    double ah = w.b_h[i];
    for (int j = 0; j < input; ++j)
      ah += w.w_h[static_cast<std::size_t>(i) * input + j] * s[j];
    for (int j = 0; j < hidden; ++j)
      ah += w.u_h[static_cast<std::size_t>(i) * hidden + j] * (r[j] * h_prev[j]);
    hc[i] = std::tanh(ah);
    h[i] = z[i] * hc[i] + (1.0 - z[i]) * h_prev[i];
  }
  return h;
}

// Pairwise AUROC: P(score_pos > score_neg) + 0.5 P(tie), O(n^2).
inline double auroc_pairs(const std::vector<double>& scores,
                          const std::vector<int>& labels) {
  double wins = 0.0, ties = 0.0;
  std::size_t np = 0, nn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    ++np;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == 1) continue;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) ties += 1.0;
    }
  }
  for (int l : labels)
    if (l != 1) ++nn;
  return (wins + 0.5 * ties) / (static_cast<double>(np) * static_cast<double>(nn));
}

// Average precision by exhaustive sweep over every distinct threshold.
inline double auprc_thresholds(const std::vector<double>& scores,
                               const std::vector<int>& labels) {
  std::set<double, std::greater<double>> thresholds(scores.begin(),
                                                    scores.end());
  std::size_t n_pos = 0;
  for (int l : labels)
    if (l == 1) ++n_pos;
  double ap = 0.0, prev_recall = 0.0;
  for (double th : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= th) {
        if (labels[i] == 1) ++tp;
        else ++fp;
      }
    }
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

// Mean negative log-probability of the true class.
inline double nll(const std::vector<double>& true_class_probs) {
  double acc = 0.0;
  for (double p : true_class_probs) acc += -std::log(p);
  return acc / static_cast<double>(true_class_probs.size());
}

// ---------------------------------------------------------------------------
// Scalar-loop evaluation of the aggregation equations, applied literally:
// per-variable embedding, time embedding, value-weighted mean, and the
// double-loop attention score sum_j x_j (Q_i . K_j) / sqrt(D_k).

struct AggParams {
  int n_vars = 0, var_dim = 0, time_dim = 0, agg_dim = 0;
  std::vector<double> w_e, b_e;     // var_dim x n_vars, var_dim
  std::vector<double> omega, beta;  // time_dim
  std::vector<double> w_t;          // agg_dim x time_dim

  int heads = 0, qk = 0, v = 0, f_hidden = 0;
  std::vector<std::vector<double>> w_q, w_k, w_v;  // per head
  std::vector<double> f_w1, f_b1, f_w2, f_b2;
  bool softmax_arm = false;
};

inline std::vector<double> agg_embed(const AggParams& p, int var) {
  std::vector<double> e(static_cast<std::size_t>(p.var_dim));
  for (int k = 0; k < p.var_dim; ++k) {
    double raw = p.w_e[static_cast<std::size_t>(k) * p.n_vars + var] + p.b_e[static_cast<std::size_t>(k)];
    e[static_cast<std::size_t>(k)] = raw > 0.0 ? raw : 0.0;
  }
  return e;
}

inline std::vector<double> agg_time_embed(const AggParams& p, double t) {
  std::vector<double> phi(static_cast<std::size_t>(p.time_dim));
  phi[0] = p.omega[0] * t + p.beta[0];
  for (int i = 1; i < p.time_dim; ++i)
    phi[static_cast<std::size_t>(i)] =
        std::sin(p.omega[static_cast<std::size_t>(i)] * t + p.beta[static_cast<std::size_t>(i)]);
  return phi;
}

inline std::vector<double> agg_time_term(const AggParams& p, double t) {
  auto phi = agg_time_embed(p, t);
  std::vector<double> out(static_cast<std::size_t>(p.agg_dim), 0.0);
  for (int k = 0; k < p.agg_dim; ++k)
    for (int j = 0; j < p.time_dim; ++j)
      out[static_cast<std::size_t>(k)] +=
          p.w_t[static_cast<std::size_t>(k) * p.time_dim + j] * phi[static_cast<std::size_t>(j)];
  return out;
}

using AggItems = std::vector<std::pair<int, double>>;  // (variable, value)

inline std::vector<double> mean_agg(const AggParams& p, double t,
                                    const AggItems& items) {
  std::vector<double> out = agg_time_term(p, t);
  const double count = static_cast<double>(items.size());
  for (const auto& [var, value] : items) {
    auto e = agg_embed(p, var);
    for (int k = 0; k < p.var_dim; ++k)
      out[static_cast<std::size_t>(k)] += (value / count) * e[static_cast<std::size_t>(k)];
  }
  return out;
}

inline std::vector<double> matvec(const std::vector<double>& m, int rows,
                                  int cols, const std::vector<double>& x) {
  std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      out[static_cast<std::size_t>(i)] +=
          m[static_cast<std::size_t>(i) * cols + j] * x[static_cast<std::size_t>(j)];
  return out;
}

// Per-head aggregated value vectors, before the post-concat network.
inline std::vector<std::vector<double>> attn_head_outputs(const AggParams& p,
                                                          const AggItems& items) {
  const int n = static_cast<int>(items.size());
  std::vector<std::vector<double>> heads_out;
  for (int h = 0; h < p.heads; ++h) {
    std::vector<std::vector<double>> q(static_cast<std::size_t>(n)),
        k(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      auto e = agg_embed(p, items[static_cast<std::size_t>(i)].first);
      q[static_cast<std::size_t>(i)] = matvec(p.w_q[static_cast<std::size_t>(h)], p.qk, p.var_dim, e);
      k[static_cast<std::size_t>(i)] = matvec(p.w_k[static_cast<std::size_t>(h)], p.qk, p.var_dim, e);
      v[static_cast<std::size_t>(i)] = matvec(p.w_v[static_cast<std::size_t>(h)], p.v, p.var_dim, e);
    }
    std::vector<double> score(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double qk_dot = 0.0;
        for (int d = 0; d < p.qk; ++d)
          qk_dot += q[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] *
                    k[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)];
        score[static_cast<std::size_t>(i)] +=
            items[static_cast<std::size_t>(j)].second * qk_dot /
            std::sqrt(static_cast<double>(p.qk));
      }
    }
    if (p.softmax_arm) score = softmax_direct(score);
    std::vector<double> head(static_cast<std::size_t>(p.v), 0.0);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < p.v; ++d)
        head[static_cast<std::size_t>(d)] += score[static_cast<std::size_t>(i)] *
                                             v[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
    heads_out.push_back(std::move(head));
  }
  return heads_out;
}

inline std::vector<double> attn_agg(const AggParams& p, double t,
                                    const AggItems& items) {
  auto heads_out = attn_head_outputs(p, items);
  std::vector<double> merged;
  for (const auto& h : heads_out) merged.insert(merged.end(), h.begin(), h.end());
  std::vector<double> hid =
      matvec(p.f_w1, p.f_hidden, static_cast<int>(merged.size()), merged);
  for (int i = 0; i < p.f_hidden; ++i) {
    hid[static_cast<std::size_t>(i)] += p.f_b1[static_cast<std::size_t>(i)];
    hid[static_cast<std::size_t>(i)] = std::max(0.0, hid[static_cast<std::size_t>(i)]);
  }
  std::vector<double> mapped = matvec(p.f_w2, p.agg_dim, p.f_hidden, hid);
  auto time_term = agg_time_term(p, t);
  for (int i = 0; i < p.agg_dim; ++i)
    mapped[static_cast<std::size_t>(i)] += p.f_b2[static_cast<std::size_t>(i)] + time_term[static_cast<std::size_t>(i)];
  return mapped;
}

}  // namespace oracle
