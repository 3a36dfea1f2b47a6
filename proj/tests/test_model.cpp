#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "auecrl/errors.hpp"
#include "auecrl/knowledge.hpp"
#include "auecrl/losses.hpp"
#include "auecrl/math.hpp"
#include "auecrl/model.hpp"
#include "test_util.hpp"

using namespace auecrl;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.input_dim = 10;
  cfg.d_e = 8;
  cfg.d_a = 6;
  cfg.d = 5;
  cfg.num_expressions = 7;
  cfg.num_aus = 12;
  return cfg;
}

PriorMatrix default_prior() {
  KnowledgeBase kb = KnowledgeBase::builtin_default();
  return prior_matrix(kb, kb.levels());
}

}  // namespace

TEST_CASE("encode: zero weights give zero features, fixed seed is deterministic") {
  ModelConfig cfg = small_config();
  ModelState state(cfg, default_prior(), 5);
  for (size_t i = 0; i < state.param_count(); ++i) state.param(i).value.fill(0.0);
  std::mt19937_64 rng(7);
  FeatureSet f = encode(Tensor::zeros({cfg.input_dim}), state);
  CHECK(f.f_e == Tensor::zeros({cfg.d_e}));
  for (const Tensor& fa : f.f_a) CHECK(fa == Tensor::zeros({cfg.d_a}));

  ModelState s2(cfg, default_prior(), 5);
  Tensor x = test::random_tensor(rng, {cfg.input_dim});
  FeatureSet a = encode(x, s2);
  FeatureSet b = encode(x, s2);
  CHECK(a.f_e == b.f_e);
  for (size_t i = 0; i < a.f_a.size(); ++i) CHECK(a.f_a[i] == b.f_a[i]);
}

TEST_CASE("encode shape contract") {
  ModelConfig cfg = small_config();
  cfg.d_e = 16;
  cfg.d_a = 8;
  cfg.input_dim = 12;
  ModelState state(cfg, default_prior(), 1);
  FeatureSet f = encode(Tensor::zeros({12}), state);
  CHECK(f.f_e.shape() == std::vector<std::int64_t>{16});
  CHECK(f.f_a.size() == 12);
  for (const Tensor& fa : f.f_a) CHECK(fa.shape() == std::vector<std::int64_t>{8});
  CHECK_THROWS_AS(encode(Tensor::zeros({9}), state), ShapeError);
}

TEST_CASE("pseudo labels select rows and behave linearly") {
  PriorMatrix prior = default_prior();
  KnowledgeBase kb = KnowledgeBase::builtin_default();
  const int e_count = kb.num_expressions();
  const int a_count = kb.num_aus();
  const int happy = kb.expression_index("Happy");

  Tensor one_hot = Tensor::one_hot(e_count, happy);
  Tensor row = pseudo_labels(one_hot, prior.values);
  for (int a = 0; a < a_count; ++a) CHECK(row(a) == prior.values(happy, a));

  // the two largest pseudo labels sit at AU6 and AU12
  std::vector<int> order(a_count);
  for (int i = 0; i < a_count; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return row(a) > row(b); });
  std::vector<int> top2{order[0], order[1]};
  std::sort(top2.begin(), top2.end());
  CHECK(top2[0] == kb.au_index("AU6"));
  CHECK(top2[1] == kb.au_index("AU12"));

  Tensor uniform = Tensor::full({e_count}, 1.0 / e_count);
  Tensor mix = pseudo_labels(uniform, prior.values);
  for (int a = 0; a < a_count; ++a) {
    double col = 0.0;
    for (int e = 0; e < e_count; ++e) col += prior.values(e, a);
    CHECK(mix(a) == doctest::Approx(col / e_count).epsilon(1e-12));
  }
}

TEST_CASE("predict_au is the per-AU linear score") {
  ModelConfig cfg = small_config();
  ModelState state(cfg, default_prior(), 9);
  std::mt19937_64 rng(13);
  FeatureSet f = encode(test::random_tensor(rng, {cfg.input_dim}), state);

  SUBCASE("zero weights and biases give zeros") {
    for (int i = 0; i < cfg.num_aus; ++i) {
      state.au_cls_w(i).value.fill(0.0);
      state.au_cls_b(i).value.fill(0.0);
    }
    CHECK(predict_au(f, state) == Tensor::zeros({cfg.num_aus}));
  }

  SUBCASE("basis-vector weight projects the first feature component") {
    state.au_cls_w(3).value.fill(0.0);
    state.au_cls_w(3).value(0) = 1.0;
    state.au_cls_b(3).value.fill(0.0);
    CHECK(predict_au(f, state)(3) == f.f_a[3](0));
  }

  SUBCASE("random instance matches direct dot products") {
    Tensor p = predict_au(f, state);
    for (int i = 0; i < cfg.num_aus; ++i) {
      double expect = state.au_cls_b(i).value.as_scalar();
      for (int k = 0; k < cfg.d_a; ++k) {
        expect += state.au_cls_w(i).value(k) * f.f_a[static_cast<size_t>(i)](k);
      }
      CHECK(p(i) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("attention logits follow the bilinear form") {
  SUBCASE("zero projection vector kills all logits") {
    ModelConfig cfg = small_config();
    ModelState state(cfg, default_prior(), 21);
    state.attn_p().value.fill(0.0);
    std::mt19937_64 rng(4);
    FeatureSet f = encode(test::random_tensor(rng, {cfg.input_dim}), state);
    AttentionParamsView view{state.attn_u().value, state.attn_v().value,
                             state.attn_p().value, state.attn_b().value};
    CHECK(attention_logits(f.f_e, f.f_a, view) == Tensor::zeros({cfg.num_aus}));
  }

  SUBCASE("zero global feature with zero bias annihilates the Hadamard product") {
    ModelConfig cfg = small_config();
    ModelState state(cfg, default_prior(), 22);
    state.attn_b().value.fill(0.0);
    Tensor f_e = Tensor::zeros({cfg.d_e});
    std::mt19937_64 rng(5);
    std::vector<Tensor> f_a;
    for (int i = 0; i < cfg.num_aus; ++i) f_a.push_back(test::random_tensor(rng, {cfg.d_a}));
    AttentionParamsView view{state.attn_u().value, state.attn_v().value,
                             state.attn_p().value, state.attn_b().value};
    CHECK(attention_logits(f_e, f_a, view) == Tensor::zeros({cfg.num_aus}));
  }

  SUBCASE("d=2 hand-evaluated example") {
    // U = [[1],[0]] style tiny setup: d_e=1, d_a=1, d=2, single AU
    Tensor u = Tensor::matrix(1, 2, {0.5, -1.0});
    Tensor v = Tensor::matrix(1, 2, {2.0, 0.25});
    Tensor p = Tensor::vector({1.0, -2.0});
    Tensor b = Tensor::vector({0.1, 0.2});
    Tensor f_e = Tensor::vector({0.8});
    std::vector<Tensor> f_a = {Tensor::vector({-0.6})};
    const double m0 = std::tanh(0.5 * 0.8) * std::tanh(2.0 * -0.6) + 0.1;
    const double m1 = std::tanh(-1.0 * 0.8) * std::tanh(0.25 * -0.6) + 0.2;
    const double expect = 1.0 * m0 + -2.0 * m1;
    Tensor logits = attention_logits(f_e, f_a, AttentionParamsView{u, v, p, b});
    CHECK(logits(0) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("normalize_attention: softmax default and ratio variant") {
  Tensor equal = Tensor::full({5}, 1.7);
  AttentionWeights w = normalize_attention(equal);
  for (int i = 0; i < 5; ++i) CHECK(w.normalized(i) == doctest::Approx(0.2).epsilon(1e-12));

  AttentionWeights lw = normalize_attention(Tensor::vector({std::log(2.0), 0.0}));
  CHECK(lw.normalized(0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(lw.normalized(1) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  std::mt19937_64 rng(6);
  for (int t = 0; t < 100; ++t) {
    AttentionWeights r = normalize_attention(test::random_tensor(rng, {12}, -8.0, 8.0));
    double sum = 0.0;
    for (double x : r.normalized.values()) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }

  AttentionWeights ratio = normalize_attention(Tensor::vector({1.0, 3.0}), AttentionNorm::kRatio);
  CHECK(ratio.normalized(0) == doctest::Approx(0.25));
  CHECK_THROWS_AS(normalize_attention(Tensor::vector({1.0, -2.0}), AttentionNorm::kRatio),
                  NumericsError);
}

TEST_CASE("softmax attention is invariant to a shared logit shift") {
  std::mt19937_64 rng(8);
  Tensor logits = test::random_tensor(rng, {12}, -3.0, 3.0);
  Tensor shifted = logits;
  for (double& v : shifted.values()) v += 17.5;
  AttentionWeights a = normalize_attention(logits);
  AttentionWeights b = normalize_attention(shifted);
  for (int i = 0; i < 12; ++i) {
    CHECK(a.normalized(i) == doctest::Approx(b.normalized(i)).epsilon(1e-12));
  }
}

TEST_CASE("fuse_au is a convex combination") {
  std::mt19937_64 rng(9);
  std::vector<Tensor> f_a;
  for (int i = 0; i < 6; ++i) f_a.push_back(test::random_tensor(rng, {4}));

  SUBCASE("identical features are reproduced for any weights") {
    std::vector<Tensor> same(6, f_a[0]);
    AttentionWeights w = normalize_attention(test::random_tensor(rng, {6}));
    Tensor fused = fuse_au(w, same);
    for (int k = 0; k < 4; ++k) CHECK(fused(k) == doctest::Approx(f_a[0](k)).epsilon(1e-12));
  }

  SUBCASE("weight one selects a single AU") {
    AttentionWeights w;
    w.logits = Tensor::zeros({6});
    w.normalized = Tensor::one_hot(6, 2);
    CHECK(fuse_au(w, f_a) == f_a[2]);
  }

  SUBCASE("random weights match the direct weighted sum and stay in the hull") {
    AttentionWeights w = normalize_attention(test::random_tensor(rng, {6}));
    Tensor fused = fuse_au(w, f_a);
    for (int k = 0; k < 4; ++k) {
      double expect = 0.0, lo = 1e300, hi = -1e300;
      for (int i = 0; i < 6; ++i) {
        expect += w.normalized(i) * f_a[static_cast<size_t>(i)](k);
        lo = std::min(lo, f_a[static_cast<size_t>(i)](k));
        hi = std::max(hi, f_a[static_cast<size_t>(i)](k));
      }
      CHECK(fused(k) == doctest::Approx(expect).epsilon(1e-12));
      CHECK(fused(k) >= lo - 1e-12);
      CHECK(fused(k) <= hi + 1e-12);
    }
  }
}

TEST_CASE("predict_expression is a softmax over the concatenated features") {
  Tensor f_fused = Tensor::vector({0.3, -0.2});
  Tensor f_e = Tensor::vector({1.0, 0.5, -0.5});

  SUBCASE("zero head gives the uniform distribution") {
    Tensor p = predict_expression(f_fused, f_e, Tensor::zeros({7, 5}), Tensor::zeros({7}));
    for (int e = 0; e < 7; ++e) CHECK(p(e) == doctest::Approx(1.0 / 7).epsilon(1e-12));
  }

  SUBCASE("large bias concentrates the mass") {
    Tensor bias = Tensor::zeros({7});
    bias(0) = 10.0;
    Tensor p = predict_expression(f_fused, f_e, Tensor::zeros({7, 5}), bias);
    CHECK(p(0) > 0.999);
  }

  SUBCASE("output sums to one") {
    std::mt19937_64 rng(10);
    for (int t = 0; t < 50; ++t) {
      Tensor p = predict_expression(f_fused, f_e, test::random_tensor(rng, {7, 5}),
                                    test::random_tensor(rng, {7}));
      double sum = 0.0;
      for (double v : p.values()) sum += v;
      CHECK(std::fabs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("pseudo labels stay in [0,1] for clamped W_EA and probability inputs") {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 50; ++t) {
    Tensor w = test::random_tensor(rng, {7, 12}, 0.0, 1.0);
    Tensor p_e = math::softmax(test::random_tensor(rng, {7}, -3.0, 3.0));
    Tensor pseudo = pseudo_labels(p_e, w);
    for (double v : pseudo.values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("plain forward and graph forward agree exactly") {
  ModelConfig cfg = small_config();
  ModelState state(cfg, default_prior(), 33);
  std::mt19937_64 rng(15);
  Tensor x = test::random_tensor(rng, {cfg.input_dim});

  ForwardResult plain = forward(x, state);
  Graph g;
  StateBinding binding = bind_state(g, state);
  SampleNodes nodes = build_sample_forward(g, binding, state, x);
  CHECK(g.value(nodes.p_e) == plain.p_e);
  CHECK(g.value(nodes.p_a) == plain.p_a);
  CHECK(g.value(nodes.attn_logits) == plain.attention.logits);
  CHECK(g.value(nodes.attn_weights) == plain.attention.normalized);
  CHECK(g.value(nodes.fused) == plain.fused);
}

TEST_CASE("end-to-end shape contract holds across configs") {
  std::mt19937_64 rng(16);
  for (const auto& [e, a, de, da, d] : {std::tuple{3, 4, 5, 6, 2}, std::tuple{7, 12, 16, 8, 4}}) {
    ModelConfig cfg;
    cfg.input_dim = 9;
    cfg.num_expressions = e;
    cfg.num_aus = a;
    cfg.d_e = de;
    cfg.d_a = da;
    cfg.d = d;
    ModelState state(cfg, PriorMatrix{Tensor::full({e, a}, 0.5)}, 2);
    ForwardResult r = forward(test::random_tensor(rng, {9}), state);
    CHECK(r.p_a.shape() == std::vector<std::int64_t>{a});
    CHECK(r.p_e.shape() == std::vector<std::int64_t>{e});
  }
}

TEST_CASE("full-pipeline gradients pass finite differences; frozen params are excluded") {
  ModelConfig cfg = small_config();
  ModelState state(cfg, default_prior(), 44);
  state.apply_stage_freeze(3);  // attention + head trainable

  std::mt19937_64 rng(18);
  Graph g;
  StateBinding binding = bind_state(g, state);
  std::vector<NodeRef> p_e_rows, logit_rows;
  std::vector<int> labels;
  for (int b = 0; b < 3; ++b) {
    SampleNodes nodes = build_sample_forward(g, binding, state,
                                             test::random_tensor(rng, {cfg.input_dim}));
    p_e_rows.push_back(nodes.p_e);
    logit_rows.push_back(nodes.attn_logits);
    labels.push_back(b % cfg.num_expressions);
  }
  KnowledgeBase kb = KnowledgeBase::builtin_default();
  NodeRef l_c = build_cross_entropy(g, p_e_rows, labels, cfg.num_expressions);
  PairRegularizerNodes reg =
      build_pair_regularizers(g, logit_rows, kb.positive_pairs(), kb.negative_pairs());
  NodeRef l_e = g.add(l_c, g.scale(g.add(reg.l_p, reg.l_n), 0.5));

  GradCheckReport report = check_state_gradients(g, l_e, binding, state, 1e-5, 1e-4);
  CHECK(report.pass);
  for (const GradCheckEntry& entry : report.params) {
    CHECK(state.find(entry.param)->frozen == false);
  }
  // every unfrozen parameter is present
  CHECK(report.params.size() == 6);  // attention u/v/p/b + head w/b
}

TEST_CASE("ModelState layout and config validation") {
  ModelConfig bad = small_config();
  bad.d = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  ModelConfig cfg = small_config();
  CHECK_THROWS_AS(ModelState(cfg, PriorMatrix{Tensor::full({3, 3}, 0.5)}, 1), ShapeError);

  ModelState state(cfg, default_prior(), 3);
  CHECK(state.w_ea().name == "w_ea");
  CHECK(state.w_ea().clamp01);
  CHECK(state.w_ea().value == default_prior().values);  // starts at the prior
  CHECK(state.find("attention.p") != nullptr);
  CHECK(state.find("nope") == nullptr);
}
