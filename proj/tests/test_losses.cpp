#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "auecrl/errors.hpp"
#include "auecrl/losses.hpp"
#include "auecrl/math.hpp"
#include "test_util.hpp"

using namespace auecrl;

namespace {

// ProbEstimates for a single pair living at indices (0,1) of a 2-AU setup.
ProbEstimates pair_probs(double m_i, double m_j, double j11, double j10, double j01) {
  ProbEstimates p;
  p.marginal_1 = Tensor::vector({m_i, m_j});
  p.marginal_0 = Tensor::vector({1 - m_i, 1 - m_j});
  p.joint_11 = Tensor::full({2, 2}, 0.0);
  p.joint_10 = Tensor::full({2, 2}, 0.0);
  p.joint_01 = Tensor::full({2, 2}, 0.0);
  p.joint_11(0, 1) = j11;
  p.joint_10(0, 1) = j10;
  p.joint_01(0, 1) = j01;
  return p;
}

const std::vector<IndexPair> kPair01 = {{0, 1}};

}  // namespace

TEST_CASE("existence scores are sigmoids of the logits") {
  Tensor s = existence_scores(Tensor::vector({0.0, 20.0, 1.0, -1.0}));
  CHECK(s(0) == 0.5);
  CHECK(s(1) > 0.999);
  CHECK(s(2) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(s(3) == doctest::Approx(0.2689).epsilon(1e-4));
}

TEST_CASE("batch_probs on degenerate and tiny batches") {
  SUBCASE("single certain sample") {
    ProbEstimates p = batch_probs(Tensor::matrix(1, 3, {1, 1, 1}));
    CHECK(p.marginal_1(0) == 1.0);
    CHECK(p.joint_11(0, 1) == 1.0);
    CHECK(p.joint_10(0, 1) == 0.0);
  }
  SUBCASE("two opposite samples") {
    ProbEstimates p = batch_probs(Tensor::matrix(2, 2, {1, 0, 0, 1}));
    CHECK(p.marginal_1(0) == 0.5);
    CHECK(p.joint_11(0, 1) == 0.0);
    CHECK(p.joint_10(0, 1) == 0.5);
    CHECK(p.joint_01(0, 1) == 0.5);
  }
  SUBCASE("estimator identities on random batches") {
    std::mt19937_64 rng(77);
    for (int t = 0; t < 20; ++t) {
      Tensor scores = test::random_tensor(rng, {5, 6}, 0.0, 1.0);
      ProbEstimates p = batch_probs(scores);
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
          CHECK(std::fabs(p.joint_11(i, j) + p.joint_10(i, j) - p.marginal_1(i)) <= 1e-9);
          CHECK(std::fabs(p.joint_11(i, j) + p.joint_01(i, j) - p.marginal_1(j)) <= 1e-9);
          const double j00 = 1.0 - p.joint_11(i, j) - p.joint_10(i, j) - p.joint_01(i, j);
          CHECK(j00 >= -1e-9);
          CHECK(p.joint_11(i, j) + p.joint_10(i, j) + p.joint_01(i, j) + j00 ==
                doctest::Approx(1.0).epsilon(1e-9));
        }
      }
    }
  }
  CHECK_THROWS_AS(batch_probs(Tensor::matrix(1, 2, {0.5, 1.5})), ShapeError);
}

TEST_CASE("loss_pos hand-computed cases") {
  // all three hinges inactive
  CHECK(loss_pos(pair_probs(0.7, 0.8, 0.6, 0.1, 0.2), kPair01) == 0.0);
  // 0.05 + 0.1 + 0.1
  CHECK(loss_pos(pair_probs(0.5, 0.5, 0.2, 0.3, 0.3), kPair01) ==
        doctest::Approx(0.25).epsilon(1e-12));
  CHECK(loss_pos(pair_probs(0.5, 0.5, 0.2, 0.3, 0.3), {}) == 0.0);
}

TEST_CASE("loss_neg hand-computed cases") {
  CHECK(loss_neg(pair_probs(0.4, 0.9, 0.0, 0.4, 0.9), kPair01) == 0.0);
  // 0.14 + 0.4 + 0.4
  CHECK(loss_neg(pair_probs(0.6, 0.6, 0.5, 0.1, 0.1), kPair01) ==
        doctest::Approx(0.94).epsilon(1e-12));
  CHECK(loss_neg(pair_probs(0.6, 0.6, 0.5, 0.1, 0.1), {}) == 0.0);
}

TEST_CASE("loss_au fixed point and unit deviation") {
  std::mt19937_64 rng(5);
  Tensor w = test::random_tensor(rng, {7, 12}, 0.0, 1.0);
  Tensor p = test::random_tensor(rng, {12});
  CHECK(loss_au(p, p, w, w, 1.0) == 0.0);

  Tensor p2 = p;
  p2(0) += 1.0;
  CHECK(loss_au(p2, p, w, w, 1.0) == doctest::Approx(1.0).epsilon(1e-12));

  SUBCASE("random instance matches the direct formula") {
    Tensor pseudo = test::random_tensor(rng, {12}, 0.0, 1.0);
    Tensor prior = test::random_tensor(rng, {7, 12}, 0.0, 1.0);
    const double lambda = 0.7;
    double expect = 0.0;
    for (int i = 0; i < 12; ++i) expect += (p(i) - pseudo(i)) * (p(i) - pseudo(i));
    for (std::int64_t i = 0; i < w.size(); ++i) {
      expect += lambda * (w[i] - prior[i]) * (w[i] - prior[i]);
    }
    CHECK(loss_au(p, pseudo, w, prior, lambda) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("loss_expr cases") {
  SUBCASE("perfect one-hot predictions give zero") {
    Tensor pred = Tensor::zeros({2, 3});
    pred(0, 1) = 1.0;
    pred(1, 0) = 1.0;
    std::vector<int> labels = {1, 0};
    LossReport r = loss_expr(pred, labels, 0.0, 0.0, 0.5);
    CHECK(std::fabs(r.l_e) < 1e-11);
    CHECK(r.l_c >= 0.0);
  }
  SUBCASE("uniform predictions over 7 classes give ln 7") {
    Tensor pred = Tensor::full({4, 7}, 1.0 / 7);
    std::vector<int> labels = {0, 3, 5, 6};
    LossReport r = loss_expr(pred, labels, 0.0, 0.0, 0.5);
    CHECK(r.l_c == doctest::Approx(std::log(7.0)).epsilon(1e-9));
  }
  SUBCASE("composite arithmetic") {
    Tensor pred = Tensor::zeros({1, 2});
    pred(0, 0) = std::exp(-1.0);  // single sample with -log p = 1
    std::vector<int> labels = {0};
    LossReport r = loss_expr(pred, labels, 0.2, 0.4, 0.5);
    CHECK(r.l_c == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.l_e == doctest::Approx(1.3).epsilon(1e-12));
    CHECK(r.l_e == doctest::Approx(r.l_c + r.alpha * (r.l_p + r.l_n)).epsilon(1e-12));
  }
}

TEST_CASE("losses are nonnegative on random inputs") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    Tensor scores = test::random_tensor(rng, {4, 6}, 0.0, 1.0);
    ProbEstimates p = batch_probs(scores);
    std::vector<IndexPair> pairs = {{0, 1}, {2, 5}};
    CHECK(loss_pos(p, pairs) >= 0.0);
    CHECK(loss_neg(p, pairs) >= 0.0);
    Tensor pa = test::random_tensor(rng, {6});
    Tensor ps = test::random_tensor(rng, {6});
    Tensor w = test::random_tensor(rng, {3, 6});
    Tensor wp = test::random_tensor(rng, {3, 6});
    CHECK(loss_au(pa, ps, w, wp, 1.0) >= 0.0);
  }
}

TEST_CASE("perfect knowledge satisfies the regularizers") {
  // positive pair: scores agree and are hard 0/1 per sample
  Tensor pos_scores = Tensor::matrix(4, 2, {1, 1, 0, 0, 1, 1, 0, 0});
  CHECK(loss_pos(batch_probs(pos_scores), kPair01) == 0.0);
  // negative pair: the product vanishes per sample
  Tensor neg_scores = Tensor::matrix(4, 2, {1, 0, 0, 1, 0, 0, 1, 0});
  CHECK(loss_neg(batch_probs(neg_scores), kPair01) == 0.0);
}

TEST_CASE("graph builders agree with the plain implementations bit-for-bit") {
  std::mt19937_64 rng(7);
  const int batch = 5, a_count = 6, e_count = 4;
  std::vector<Tensor> logits_rows;
  Tensor scores_matrix = Tensor::zeros({batch, a_count});
  for (int b = 0; b < batch; ++b) {
    logits_rows.push_back(test::random_tensor(rng, {a_count}, -2.0, 2.0));
    Tensor s = existence_scores(logits_rows.back());
    for (int a = 0; a < a_count; ++a) scores_matrix(b, a) = s(a);
  }
  std::vector<IndexPair> pos = {{0, 1}, {2, 3}};
  std::vector<IndexPair> neg = {{1, 4}};

  Graph g;
  std::vector<NodeRef> logit_nodes;
  for (const Tensor& row : logits_rows) logit_nodes.push_back(g.constant(row));
  PairRegularizerNodes reg = build_pair_regularizers(g, logit_nodes, pos, neg);
  ProbEstimates probs = batch_probs(scores_matrix);
  CHECK(g.value(reg.l_p).as_scalar() == loss_pos(probs, pos));
  CHECK(g.value(reg.l_n).as_scalar() == loss_neg(probs, neg));

  // cross entropy route
  std::vector<NodeRef> pred_nodes;
  Tensor pred_matrix = Tensor::zeros({batch, e_count});
  std::vector<int> labels;
  for (int b = 0; b < batch; ++b) {
    Tensor p = math::softmax(test::random_tensor(rng, {e_count}, -2.0, 2.0));
    for (int e = 0; e < e_count; ++e) pred_matrix(b, e) = p(e);
    pred_nodes.push_back(g.constant(p));
    labels.push_back(b % e_count);
  }
  NodeRef l_c = build_cross_entropy(g, pred_nodes, labels, e_count);
  CHECK(g.value(l_c).as_scalar() == cross_entropy_mean(pred_matrix, labels));

  // AU loss route
  std::vector<NodeRef> pa_nodes, pseudo_nodes;
  Tensor pa_matrix = Tensor::zeros({batch, a_count});
  Tensor pseudo_matrix = Tensor::zeros({batch, a_count});
  for (int b = 0; b < batch; ++b) {
    Tensor pa = test::random_tensor(rng, {a_count});
    Tensor ps = test::random_tensor(rng, {a_count}, 0.0, 1.0);
    for (int a = 0; a < a_count; ++a) {
      pa_matrix(b, a) = pa(a);
      pseudo_matrix(b, a) = ps(a);
    }
    pa_nodes.push_back(g.constant(pa));
    pseudo_nodes.push_back(g.constant(ps));
  }
  Tensor w = test::random_tensor(rng, {e_count, a_count}, 0.0, 1.0);
  Tensor prior = test::random_tensor(rng, {e_count, a_count}, 0.0, 1.0);
  NodeRef l_au = build_loss_au(g, pa_nodes, pseudo_nodes, g.constant(w), prior, 1.0);
  CHECK(g.value(l_au).as_scalar() == loss_au_batch(pa_matrix, pseudo_matrix, w, prior, 1.0));
}

TEST_CASE("regularizer fixed point is exact") {
  std::mt19937_64 rng(8);
  Tensor w = test::random_tensor(rng, {7, 12}, 0.0, 1.0);
  Tensor pa = test::random_tensor(rng, {12});
  CHECK(loss_au(pa, pa, w, w, 123.0) == 0.0);
}
