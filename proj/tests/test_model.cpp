#include "tde/model.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "tde/errors.hpp"
#include "tde/loss.hpp"
#include "tde/rng.hpp"
#include "tde/synth.hpp"

using namespace tde;

namespace {

Tensor* param(TdeModel& m, const std::string& name) {
  for (auto& p : m.named_params()) {
    if (p.name == name) return p.tensor;
  }
  REQUIRE_MESSAGE(false, "missing parameter " << name);
  return nullptr;
}

std::vector<double> dump(const Tensor& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

void randomize(Tensor& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
}

TdeConfig small_attention_config(int n_vars) {
  TdeConfig cfg;
  cfg.n_variables = n_vars;
  cfg.n_statics = 2;
  cfg.mode = AggregationMode::kAttention;
  cfg.var_dim = 4;
  cfg.time_dim = 3;
  cfg.agg_dim = 4;
  cfg.static_dim = 2;
  cfg.heads = 2;
  cfg.qk_dim = 2;
  cfg.v_dim = 2;
  cfg.attn_hidden = 3;
  cfg.hidden_dim = 5;
  cfg.classifier_hidden = 4;
  return cfg;
}

oracle::AggParams extract_params(TdeModel& m) {
  const TdeConfig& cfg = m.config();
  oracle::AggParams p;
  p.n_vars = cfg.n_variables;
  p.var_dim = cfg.var_dim;
  p.time_dim = cfg.time_dim;
  p.agg_dim = cfg.agg_dim;
  p.w_e = dump(*param(m, "w_e"));
  p.b_e = dump(*param(m, "b_e"));
  p.omega = dump(*param(m, "omega"));
  p.beta = dump(*param(m, "beta"));
  p.w_t = dump(*param(m, "w_t"));
  if (cfg.mode == AggregationMode::kAttention) {
    p.heads = cfg.heads;
    p.qk = cfg.effective_qk();
    p.v = cfg.effective_v();
    p.f_hidden = cfg.effective_attn_hidden();
    for (int h = 0; h < cfg.heads; ++h) {
      const std::string prefix = "head" + std::to_string(h) + ".";
      p.w_q.push_back(dump(*param(m, prefix + "w_q")));
      p.w_k.push_back(dump(*param(m, prefix + "w_k")));
      p.w_v.push_back(dump(*param(m, prefix + "w_v")));
    }
    p.f_w1 = dump(*param(m, "f.w1"));
    p.f_b1 = dump(*param(m, "f.b1"));
    p.f_w2 = dump(*param(m, "f.w2"));
    p.f_b2 = dump(*param(m, "f.b2"));
    p.softmax_arm = cfg.attention_softmax;
  }
  return p;
}

Instance random_instance(int n_vars, Rng& rng, int max_times = 5) {
  Instance inst;
  inst.id = "r";
  int n_times = 1 + static_cast<int>(rng.uniform_index(max_times));
  double t = 0.0;
  for (int k = 0; k < n_times; ++k) {
    t += 0.25 + rng.uniform(0.0, 4.0);
    int group_size = 1 + static_cast<int>(rng.uniform_index(n_vars));
    std::vector<int> vars(n_vars);
    for (int d = 0; d < n_vars; ++d) vars[static_cast<std::size_t>(d)] = d;
    rng.shuffle(vars);
    for (int g = 0; g < group_size; ++g) {
      inst.observations.push_back({t, rng.normal(), vars[static_cast<std::size_t>(g)]});
    }
  }
  inst.statics.emplace_back(0, rng.normal());
  inst.statics.emplace_back(1, rng.normal());
  inst.label = rng.bernoulli(0.5) ? 1 : 0;
  return inst;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("variable embedding fixed points") {
  SUBCASE("zero table gives zero embedding") {
    TdeConfig cfg = small_attention_config(3);
    TdeModel m(cfg);  // zero-filled
    Tensor e = m.variable_embed(1);
    for (double v : e.data()) CHECK(v == 0.0);
  }
  SUBCASE("identity table gives one-hot embeddings") {
    TdeConfig cfg;
    cfg.n_variables = 4;
    cfg.var_dim = 4;
    cfg.agg_dim = 4;
    cfg.mode = AggregationMode::kMean;
    cfg.n_statics = 0;
    TdeModel m(cfg);
    *param(m, "w_e") = Tensor::identity(4);
    Tensor e = m.variable_embed(2);
    for (int i = 0; i < 4; ++i)
      CHECK(e[static_cast<std::size_t>(i)] == (i == 2 ? 1.0 : 0.0));
  }
  SUBCASE("relu clamps a fully negative pre-activation") {
    TdeConfig cfg;
    cfg.n_variables = 1;
    cfg.var_dim = 2;
    cfg.agg_dim = 2;
    cfg.mode = AggregationMode::kMean;
    cfg.n_statics = 0;
    TdeModel m(cfg);
    *param(m, "w_e") = Tensor::matrix(2, 1, {-1.0, 2.0});
    *param(m, "b_e") = Tensor::vector({0.5, -3.0});
    Tensor e = m.variable_embed(0);
    CHECK(e[0] == 0.0);  // relu(-0.5)
    CHECK(e[1] == 0.0);  // relu(-1.0)
  }
  SUBCASE("out-of-range index") {
    TdeModel m(small_attention_config(3));
    CHECK_THROWS_AS((void)m.variable_embed(3), DimensionError);
    CHECK_THROWS_AS((void)m.variable_embed(-1), DimensionError);
  }
}

TEST_CASE("variable embeddings are coordinatewise non-negative") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    TdeConfig cfg = small_attention_config(5);
    Rng init(rng.next_u64());
    TdeModel m(cfg, init);
    randomize(*param(m, "w_e"), rng, -3.0, 3.0);
    randomize(*param(m, "b_e"), rng, -3.0, 3.0);
    for (int d = 0; d < 5; ++d) {
      Tensor e = m.variable_embed(d);
      for (double v : e.data()) CHECK(v >= 0.0);
    }
  }
}

TEST_CASE("time embedding fixed points and translation identity") {
  TdeConfig cfg = small_attention_config(3);
  TdeModel m(cfg);

  SUBCASE("zero parameters at t=0 give the zero vector") {
    Tensor phi = m.time_embed(0.0);
    for (double v : phi.data()) CHECK(v == 0.0);
  }
  SUBCASE("direct evaluation") {
    TdeConfig c2 = cfg;
    c2.time_dim = 2;
    TdeModel m2(c2);
    *param(m2, "omega") = Tensor::vector({1.0, 1.5707963267948966});
    *param(m2, "beta") = Tensor::vector({0.0, 0.0});
    Tensor phi = m2.time_embed(1.0);
    CHECK(phi[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(phi[1] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("linear term translates by omega_0 * delta") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      randomize(*param(m, "omega"), rng);
      randomize(*param(m, "beta"), rng);
      double t = rng.uniform(0.0, 48.0);
      double delta = rng.uniform(0.0, 10.0);
      double omega0 = (*param(m, "omega"))[0];
      double lhs = m.time_embed(t + delta)[0] - m.time_embed(t)[0];
      CHECK(lhs == doctest::Approx(omega0 * delta).epsilon(1e-9));
    }
  }
}

TEST_CASE("mean aggregation fixed points") {
  TdeConfig cfg;
  cfg.n_variables = 3;
  cfg.n_statics = 0;
  cfg.mode = AggregationMode::kMean;
  cfg.var_dim = 4;
  cfg.agg_dim = 4;
  cfg.time_dim = 2;
  cfg.hidden_dim = 3;
  Rng rng(9);
  TdeModel m(cfg, rng);

  SUBCASE("single observation with unit value returns its embedding") {
    *param(m, "w_t") = Tensor::zeros({4, 2});
    TimeStepGroup g{2.5, {{1, 1.0}}};
    Tensor agg = m.aggregate_mean(g);
    Tensor e = m.variable_embed(1);
    for (std::size_t i = 0; i < agg.numel(); ++i) CHECK(agg[i] == e[i]);
  }
  SUBCASE("opposite values on equal embeddings cancel to the time term") {
    // Make columns 0 and 1 of the table identical.
    Tensor& we = *param(m, "w_e");
    for (int r = 0; r < 4; ++r) we.at(r, 1) = we.at(r, 0);
    TimeStepGroup g{1.0, {{0, 2.0}, {1, -2.0}}};
    Tensor agg = m.aggregate_mean(g);
    Tensor time_term = matmul(*param(m, "w_t"), m.time_embed(1.0));
    for (std::size_t i = 0; i < agg.numel(); ++i)
      CHECK(agg[i] == doctest::Approx(time_term[i]).epsilon(1e-12));
  }
  SUBCASE("random three-variable group matches the scalar-loop oracle") {
    Rng trial_rng(31);
    for (int trial = 0; trial < 50; ++trial) {
      randomize(*param(m, "w_e"), trial_rng);
      randomize(*param(m, "b_e"), trial_rng);
      randomize(*param(m, "omega"), trial_rng);
      randomize(*param(m, "beta"), trial_rng);
      randomize(*param(m, "w_t"), trial_rng);
      TimeStepGroup g{trial_rng.uniform(0.0, 48.0),
                      {{0, trial_rng.normal()},
                       {1, trial_rng.normal()},
                       {2, trial_rng.normal()}}};
      Tensor agg = m.aggregate_mean(g);
      auto expect = oracle::mean_agg(extract_params(m), g.time, g.items);
      for (std::size_t i = 0; i < agg.numel(); ++i)
        CHECK(agg[i] == doctest::Approx(expect[i]).epsilon(1e-10));
    }
  }
  SUBCASE("empty group is a contract violation") {
    CHECK_THROWS_AS((void)m.aggregate_mean(TimeStepGroup{}), StateError);
  }
}

TEST_CASE("attention aggregation fixed points and oracle equivalence") {
  SUBCASE("all-zero values gate the heads to zero") {
    TdeConfig cfg = small_attention_config(4);
    Rng rng(8);
    TdeModel m(cfg, rng);
    TimeStepGroup g{3.0, {{0, 0.0}, {2, 0.0}}};
    for (const Tensor& head : m.attention_head_outputs(g)) {
      for (double v : head.data()) CHECK(v == 0.0);
    }
    // Full result is then f(0) plus the projected time embedding.
    Tensor agg = m.aggregate_attention(g);
    oracle::AggParams p = extract_params(m);
    auto expect = oracle::attn_agg(p, g.time, g.items);
    for (std::size_t i = 0; i < agg.numel(); ++i)
      CHECK(agg[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
  SUBCASE("softmax arm puts weight 1.0 on a lone observed variable") {
    TdeConfig cfg = small_attention_config(4);
    cfg.attention_softmax = true;
    Rng rng(12);
    TdeModel m(cfg, rng);
    TimeStepGroup g{1.0, {{2, -0.7}}};
    for (const auto& head : m.attention_weights(g)) {
      REQUIRE(head.size() == 1);
      CHECK(head[0] == 1.0);
    }
  }
  SUBCASE("single-head two-variable case matches the literal double loop") {
    TdeConfig cfg;
    cfg.n_variables = 2;
    cfg.n_statics = 0;
    cfg.mode = AggregationMode::kAttention;
    cfg.var_dim = 2;
    cfg.time_dim = 2;
    cfg.agg_dim = 2;
    cfg.heads = 1;
    cfg.qk_dim = 2;
    cfg.v_dim = 2;
    cfg.attn_hidden = 2;
    cfg.hidden_dim = 3;
    TdeModel m(cfg);
    *param(m, "w_e") = Tensor::matrix(2, 2, {0.3, -0.2, 0.8, 0.5});
    *param(m, "b_e") = Tensor::vector({0.1, 0.05});
    *param(m, "head0.w_q") = Tensor::matrix(2, 2, {0.5, -0.1, 0.2, 0.4});
    *param(m, "head0.w_k") = Tensor::matrix(2, 2, {-0.3, 0.6, 0.1, 0.2});
    *param(m, "head0.w_v") = Tensor::matrix(2, 2, {0.7, 0.1, -0.2, 0.3});
    *param(m, "f.w1") = Tensor::matrix(2, 2, {1.0, 0.2, -0.4, 0.6});
    *param(m, "f.b1") = Tensor::vector({0.05, -0.02});
    *param(m, "f.w2") = Tensor::matrix(2, 2, {0.9, -0.3, 0.25, 0.5});
    *param(m, "f.b2") = Tensor::vector({0.0, 0.1});
    *param(m, "omega") = Tensor::vector({0.2, 0.6});
    *param(m, "beta") = Tensor::vector({0.1, -0.4});
    *param(m, "w_t") = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
    TimeStepGroup g{2.0, {{0, 1.3}, {1, -0.6}}};
    Tensor agg = m.aggregate_attention(g);
    auto expect = oracle::attn_agg(extract_params(m), g.time, g.items);
    REQUIRE(expect.size() == agg.numel());
    for (std::size_t i = 0; i < agg.numel(); ++i)
      CHECK(agg[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
  SUBCASE("randomized groups match the oracle in both arms") {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
      TdeConfig cfg = small_attention_config(5);
      cfg.attention_softmax = (trial % 2 == 1);
      Rng init(rng.next_u64());
      TdeModel m(cfg, init);
      int n_obs = 1 + static_cast<int>(rng.uniform_index(5));
      TimeStepGroup g;
      g.time = rng.uniform(0.0, 48.0);
      std::vector<int> vars = {0, 1, 2, 3, 4};
      rng.shuffle(vars);
      for (int i = 0; i < n_obs; ++i)
        g.items.emplace_back(vars[static_cast<std::size_t>(i)], rng.normal());
      std::sort(g.items.begin(), g.items.end());
      Tensor agg = m.aggregate_attention(g);
      auto expect = oracle::attn_agg(extract_params(m), g.time, g.items);
      for (std::size_t i = 0; i < agg.numel(); ++i)
        CHECK(agg[i] == doctest::Approx(expect[i])
                            .epsilon(1e-10)
                            .scale(std::abs(expect[i]) + 1.0));
    }
  }
}

TEST_CASE("softmax-arm attention weights normalize to 1") {
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    TdeConfig cfg = small_attention_config(6);
    cfg.attention_softmax = true;
    Rng init(rng.next_u64());
    TdeModel m(cfg, init);
    int n_obs = 1 + static_cast<int>(rng.uniform_index(6));
    TimeStepGroup g;
    g.time = rng.uniform(0.0, 48.0);
    for (int i = 0; i < n_obs; ++i) g.items.emplace_back(i, rng.normal());
    for (const auto& head : m.attention_weights(g)) {
      double total = 0.0;
      for (double w : head) total += w;
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("non-softmax head outputs are linear in the observed values") {
  Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    TdeConfig cfg = small_attention_config(5);
    Rng init(rng.next_u64());
    TdeModel m(cfg, init);
    int n_obs = 1 + static_cast<int>(rng.uniform_index(5));
    TimeStepGroup g;
    g.time = rng.uniform(0.0, 48.0);
    for (int i = 0; i < n_obs; ++i) g.items.emplace_back(i, rng.normal());
    double c = rng.uniform(-3.0, 3.0);
    TimeStepGroup scaled = g;
    for (auto& [_, value] : scaled.items) value *= c;

    auto base = m.attention_head_outputs(g);
    auto got = m.attention_head_outputs(scaled);
    for (std::size_t h = 0; h < base.size(); ++h) {
      for (std::size_t i = 0; i < base[h].numel(); ++i) {
        CHECK(got[h][i] == doctest::Approx(c * base[h][i])
                               .epsilon(1e-12)
                               .scale(std::abs(base[h][i]) + 1.0));
      }
    }
  }
}

TEST_CASE("aggregation ignores schema variables never observed at t") {
  Rng rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    const bool softmax_arm = rng.bernoulli(0.5);
    TdeConfig small = small_attention_config(4);
    small.attention_softmax = softmax_arm;
    TdeConfig wide = small;
    wide.n_variables = 5;  // one extra variable that never appears
    Rng init(rng.next_u64());
    TdeModel a(small, init);
    TdeModel b(wide);
    // Copy every parameter; the wider embedding table gets the same first
    // four columns and arbitrary junk in the new one.
    auto pa = a.named_params();
    auto pb = b.named_params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      Tensor& src = *pa[i].tensor;
      Tensor& dst = *pb[i].tensor;
      if (pa[i].name == "w_e") {
        for (int r = 0; r < src.rows(); ++r) {
          for (int c = 0; c < src.cols(); ++c) dst.at(r, c) = src.at(r, c);
          dst.at(r, 4) = rng.normal();
        }
      } else {
        dst = src;
      }
    }
    TimeStepGroup g;
    g.time = rng.uniform(0.0, 48.0);
    int n_obs = 1 + static_cast<int>(rng.uniform_index(4));
    for (int i = 0; i < n_obs; ++i) g.items.emplace_back(i, rng.normal());
    Tensor agg_a = a.aggregate_attention(g);
    Tensor agg_b = b.aggregate_attention(g);
    for (std::size_t i = 0; i < agg_a.numel(); ++i)
      CHECK(agg_a[i] == agg_b[i]);
  }
}

TEST_CASE("gru step fixed points and oracle equivalence") {
  SUBCASE("zero weights halve the previous state") {
    GruCell cell;
    cell.w_r = Tensor::zeros({2, 3});
    cell.u_r = Tensor::zeros({2, 2});
    cell.b_r = Tensor::zeros({2});
    cell.w_z = cell.w_r;
    cell.u_z = cell.u_r;
    cell.b_z = cell.b_r;
    cell.w_h = cell.w_r;
    cell.u_h = cell.u_r;
    cell.b_h = cell.b_r;
    Tensor h_prev = Tensor::vector({0.8, -0.4});
    Tensor s = Tensor::vector({1.0, 2.0, 3.0});
    Tensor h = gru_step(cell, h_prev, s);
    CHECK(h[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(h[1] == doctest::Approx(-0.2).epsilon(1e-15));

    Tensor h0 = gru_step(cell, Tensor::zeros({2}), Tensor::zeros({3}));
    CHECK(h0[0] == 0.0);
    CHECK(h0[1] == 0.0);
  }
  SUBCASE("random cells match the scalar oracle") {
    Rng rng(55);
    for (int trial = 0; trial < 50; ++trial) {
      Rng init(rng.next_u64());
      GruCell cell = GruCell::init(2, 2, init);
      Tensor h_prev = Tensor::vector({rng.normal(), rng.normal()});
      Tensor s = Tensor::vector({rng.normal(), rng.normal()});
      Tensor h = gru_step(cell, h_prev, s);
      oracle::GruWeights w;
      w.w_r = dump(cell.w_r);
      w.u_r = dump(cell.u_r);
      w.b_r = dump(cell.b_r);
      w.w_z = dump(cell.w_z);
      w.u_z = dump(cell.u_z);
      w.b_z = dump(cell.b_z);
      w.w_h = dump(cell.w_h);
      w.u_h = dump(cell.u_h);
      w.b_h = dump(cell.b_h);
      auto expect = oracle::gru_step(w, dump(h_prev), dump(s), 2, 2);
      CHECK(h[0] == doctest::Approx(expect[0]).epsilon(1e-12));
      CHECK(h[1] == doctest::Approx(expect[1]).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward trace structure and invariances") {
  TdeConfig cfg = small_attention_config(4);
  Rng rng(77);
  TdeModel m(cfg, rng);

  SUBCASE("three unique times yield three statuses and states") {
    Instance inst{"a",
                  {{0, 0.5}},
                  {{1.0, 0.2, 0}, {1.0, -0.1, 1}, {2.0, 0.3, 2}, {5.0, 1.0, 0}},
                  1};
    ForwardTrace trace = m.forward(inst);
    CHECK(trace.times.size() == 3);
    CHECK(trace.local_status.size() == 3);
    CHECK(trace.hidden.size() == 3);
    CHECK(trace.probs.numel() == 2);
    double total = trace.probs[0] + trace.probs[1];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("identical observations under different ids trace identically") {
    Instance a{"a", {{0, 0.5}}, {{1.0, 0.2, 0}, {2.0, 0.3, 2}}, 1};
    Instance b = a;
    b.id = "b";
    ForwardTrace ta = m.forward(a);
    ForwardTrace tb = m.forward(b);
    for (std::size_t i = 0; i < ta.probs.numel(); ++i)
      CHECK(ta.probs[i] == tb.probs[i]);
  }
  SUBCASE("observation order never matters") {
    Rng prng(91);
    for (int trial = 0; trial < 100; ++trial) {
      Instance inst = random_instance(4, prng);
      Instance shuffled = inst;
      prng.shuffle(shuffled.observations);
      ForwardTrace ta = m.forward(inst);
      ForwardTrace tb = m.forward(shuffled);
      REQUIRE(ta.times == tb.times);
      for (std::size_t k = 0; k < ta.hidden.size(); ++k)
        for (std::size_t i = 0; i < ta.hidden[k].numel(); ++i)
          CHECK(ta.hidden[k][i] == tb.hidden[k][i]);
      for (std::size_t i = 0; i < ta.probs.numel(); ++i)
        CHECK(ta.probs[i] == tb.probs[i]);
    }
  }
  SUBCASE("empty instance is a data error") {
    Instance empty{"e", {}, {}, 0};
    CHECK_THROWS_AS((void)m.forward(empty), DataError);
  }
}

TEST_CASE("online prediction is causal by construction") {
  TdeConfig cfg = small_attention_config(4);
  Rng rng(83);
  TdeModel m(cfg, rng);

  SUBCASE("truncation equivalence, exact") {
    Rng prng(13);
    for (int trial = 0; trial < 100; ++trial) {
      Instance inst = random_instance(4, prng);
      auto online = m.predict_online(inst);
      ForwardTrace full = m.forward(inst);
      REQUIRE(online.size() == full.times.size());
      std::size_t k = prng.uniform_index(online.size());
      // Truncate strictly after time_k and re-run the whole pipeline.
      Instance cut = inst;
      cut.observations.clear();
      for (const auto& obs : inst.observations)
        if (obs.time <= full.times[k]) cut.observations.push_back(obs);
      ForwardTrace again = m.forward(cut);
      CHECK(online[k].second == again.probs[1]);
    }
  }
  SUBCASE("single timestep equals the forward probability") {
    Instance inst{"s", {{0, 0.1}}, {{4.0, 0.6, 1}}, 0};
    auto online = m.predict_online(inst);
    REQUIRE(online.size() == 1);
    CHECK(online[0].second == m.forward(inst).probs[1]);
  }
  SUBCASE("five steps arrive in time order") {
    Instance inst{"f",
                  {},
                  {{1.0, 0.1, 0},
                   {2.0, 0.2, 1},
                   {3.0, 0.3, 2},
                   {4.0, 0.4, 3},
                   {5.0, 0.5, 0}},
                  0};
    auto online = m.predict_online(inst);
    REQUIRE(online.size() == 5);
    for (std::size_t k = 1; k < online.size(); ++k)
      CHECK(online[k].first > online[k - 1].first);
  }
}

TEST_CASE("full-loss gradients match central differences in every mode") {
  // Tiny dimensions keep the 2P forward passes fast; tolerance follows the
  // f64 central-difference budget.
  Dataset batch;
  Rng drng(7);
  Instance i1 = random_instance(3, drng, 3);
  Instance i2 = random_instance(3, drng, 3);
  i1.label = 0;
  i2.label = 1;

  auto run = [&](AggregationMode mode, bool softmax_arm) {
    TdeConfig cfg;
    cfg.n_variables = 3;
    cfg.n_statics = 2;
    cfg.mode = mode;
    cfg.attention_softmax = softmax_arm;
    cfg.var_dim = 3;
    cfg.time_dim = 2;
    cfg.agg_dim = 3;
    cfg.static_dim = 2;
    cfg.heads = 2;
    cfg.qk_dim = 2;
    cfg.v_dim = 2;
    cfg.attn_hidden = 3;
    cfg.hidden_dim = 3;
    cfg.classifier_hidden = 3;
    Rng rng(1234);
    TdeModel m(cfg, rng);
    std::vector<Tensor*> params;
    for (auto& p : m.named_params()) params.push_back(p.tensor);
    auto f = [&]() -> Tensor {
      Tensor l1 = m.instance_loss(i1, DropoutCtx{});
      Tensor l2 = m.instance_loss(i2, DropoutCtx{});
      return scale(add(l1, l2), 0.5);
    };
    return grad_check(f, params, 1e-5);
  };

  CHECK(run(AggregationMode::kMean, false) < 1e-4);
  CHECK(run(AggregationMode::kAttention, false) < 1e-4);
  CHECK(run(AggregationMode::kAttention, true) < 1e-4);
}

TEST_CASE("embedding export shapes") {
  TdeConfig cfg = small_attention_config(4);
  Rng rng(3);
  TdeModel m(cfg, rng);
  Dataset ds;
  ds.schema.n_classes = 2;
  for (int d = 0; d < 4; ++d)
    ds.schema.variables.push_back({"v" + std::to_string(d), VarKind::kNumerical, 0, 1, false});
  ds.schema.statics.push_back({"age", VarKind::kNumerical, 0, 1, false});
  ds.schema.statics.push_back({"sex", VarKind::kNumerical, 0, 1, false});
  Instance a{"a", {}, {{1.0, 0.1, 0}, {2.0, 0.2, 1}, {3.0, 0.3, 2}}, 0};
  Instance b{"b", {}, {{1.0, 0.1, 0}, {1.5, 0.2, 1}, {2.0, 0.3, 2}, {4.0, 0.4, 3}}, 1};
  ds.instances = {a, b};

  auto read_lines = [](const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
  };

  std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("tde-emb-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);

  export_embeddings(ds, m, (dir / "global.csv").string(), "global");
  auto global_lines = read_lines((dir / "global.csv").string());
  CHECK(global_lines.size() == 1 + 2);

  export_embeddings(ds, m, (dir / "local.csv").string(), "local");
  auto local_lines = read_lines((dir / "local.csv").string());
  CHECK(local_lines.size() == 1 + 3 + 4);
  // Column count: id, time, label, then one per aggregation dimension.
  std::size_t commas = static_cast<std::size_t>(
      std::count(local_lines[1].begin(), local_lines[1].end(), ','));
  CHECK(commas + 1 == static_cast<std::size_t>(cfg.agg_dim) + 3);

  CHECK_THROWS_AS(export_embeddings(ds, m, (dir / "x.csv").string(), "both"),
                  ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config validation rejects inconsistent dimensions") {
  TdeConfig cfg = small_attention_config(4);
  cfg.mode = AggregationMode::kMean;
  cfg.agg_dim = 8;
  cfg.var_dim = 4;
  CHECK_THROWS_AS((void)TdeModel(cfg), ConfigError);

  TdeConfig bad = small_attention_config(4);
  bad.heads = 0;
  CHECK_THROWS_AS((void)TdeModel(bad), ConfigError);

  TdeConfig neg = small_attention_config(4);
  neg.dropout = 1.0;
  CHECK_THROWS_AS((void)TdeModel(neg), ConfigError);
}

TEST_SUITE_END();
