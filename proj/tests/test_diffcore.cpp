#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "auecrl/errors.hpp"
#include "auecrl/gradcheck.hpp"
#include "auecrl/graph.hpp"
#include "auecrl/math.hpp"
#include "test_util.hpp"

using namespace auecrl;

TEST_CASE("tensor creation validates shape and finiteness") {
  CHECK(Tensor::scalar(2.0).as_scalar() == 2.0);
  CHECK(Tensor::zeros({3, 4}).size() == 12);
  CHECK_THROWS_AS(Tensor::with_shape({2, 2}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(Tensor::vector({1.0, std::nan("")}), NumericsError);
  CHECK_THROWS_AS(Tensor::zeros({0}), ShapeError);
  CHECK(Tensor::one_hot(4, 2)(2) == 1.0);
  CHECK(Tensor::one_hot(4, 2)(1) == 0.0);
}

TEST_CASE("elementwise forward values") {
  Graph g;
  NodeRef z = g.constant(Tensor::zeros({5}));
  CHECK(g.value(g.tanh(z)) == Tensor::zeros({5}));

  NodeRef s = g.softmax(g.constant(Tensor::vector({0.0, 0.0, 0.0})));
  for (int i = 0; i < 3; ++i) CHECK(g.value(s)(i) == doctest::Approx(1.0 / 3).epsilon(1e-15));

  std::mt19937_64 rng(11);
  Tensor v = test::random_tensor(rng, {7});
  NodeRef had = g.hadamard(g.constant(v), g.constant(Tensor::full({7}, 1.0)));
  CHECK(g.value(had) == v);

  NodeRef h = g.hinge(g.constant(Tensor::vector({-1.0, 0.0, 2.5})));
  CHECK(g.value(h)(0) == 0.0);
  CHECK(g.value(h)(1) == 0.0);
  CHECK(g.value(h)(2) == 2.5);
}

TEST_CASE("shape errors carry context") {
  Graph g;
  NodeRef a = g.constant(Tensor::zeros({3}));
  NodeRef b = g.constant(Tensor::zeros({4}));
  CHECK_THROWS_AS(g.add(a, b), ShapeError);
  CHECK_THROWS_AS(g.dot(a, b), ShapeError);
  CHECK_THROWS_AS(g.matvec(g.constant(Tensor::zeros({2, 3})), b), ShapeError);
}

TEST_CASE("non-finite intermediate raises NumericsError") {
  Graph g;
  NodeRef big = g.leaf("x", Tensor::vector({1e308}));
  CHECK_THROWS_AS(g.hadamard(big, big), NumericsError);
}

TEST_CASE("d/dx tanh at 0 is 1; mse gradient vanishes at the minimum") {
  Graph g;
  NodeRef x = g.leaf("x", Tensor::scalar(0.0));
  NodeRef y = g.tanh(x);
  g.backward(y);
  CHECK(g.grad(x).as_scalar() == 1.0);

  Graph g2;
  std::mt19937_64 rng(3);
  Tensor p = test::random_tensor(rng, {6});
  NodeRef a = g2.leaf("p", p);
  NodeRef root = g2.squared_error(a, g2.constant(p));
  g2.backward(root);
  CHECK(g2.grad(a) == Tensor::zeros({6}));
}

TEST_CASE("hinge subgradient at the kink is exactly 0") {
  Graph g;
  NodeRef x = g.leaf("x", Tensor::vector({0.0, -0.5, 0.5}));
  g.backward(g.sum(g.hinge(x)));
  CHECK(g.grad(x)(0) == 0.0);
  CHECK(g.grad(x)(1) == 0.0);
  CHECK(g.grad(x)(2) == 1.0);
}

TEST_CASE("matrix ops match hand arithmetic and pass finite differences") {
  Graph g;
  NodeRef m = g.leaf("m", Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  NodeRef x = g.leaf("x", Tensor::vector({1, -1, 2}));
  NodeRef y = g.matvec(m, x);
  CHECK(g.value(y)(0) == 5.0);
  CHECK(g.value(y)(1) == 11.0);

  NodeRef v = g.leaf("v", Tensor::vector({1, -1}));
  NodeRef z = g.vecmat(v, m);
  CHECK(g.value(z)(0) == -3.0);
  CHECK(g.value(z)(1) == -3.0);
  CHECK(g.value(z)(2) == -3.0);

  NodeRef mm = g.matmul(m, g.leaf("b", Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1})));
  CHECK(g.value(mm)(0, 0) == 4.0);
  CHECK(g.value(mm)(1, 1) == 11.0);

  NodeRef root = g.sum(g.tanh(g.concat(std::array{y, z})));
  std::array wrt{m, x, v};
  GradCheckReport report = finite_difference_check(g, root, wrt, 1e-5, 1e-6);
  CHECK(report.pass);
}

TEST_CASE("quadratic norm gradient passes at tol 1e-6") {
  std::mt19937_64 rng(17);
  Graph g;
  NodeRef x = g.leaf("x", test::random_tensor(rng, {9}));
  NodeRef root = g.squared_error(x, g.constant(Tensor::zeros({9})));
  std::array wrt{x};
  GradCheckReport report = finite_difference_check(g, root, wrt, 1e-5, 1e-6);
  CHECK(report.pass);
  // closed form: gradient is 2x
  g.recompute();
  g.backward(root);
  for (int i = 0; i < 9; ++i) {
    CHECK(g.grad(x)(i) == doctest::Approx(2.0 * g.value(x)(i)).epsilon(1e-12));
  }
}

TEST_CASE("softmax + cross-entropy composite passes at tol 1e-4") {
  std::mt19937_64 rng(23);
  Graph g;
  NodeRef logits = g.leaf("logits", test::random_tensor(rng, {7}, -2.0, 2.0));
  NodeRef root = g.cross_entropy(g.softmax(logits), g.constant(Tensor::one_hot(7, 3)));
  std::array wrt{logits};
  CHECK(finite_difference_check(g, root, wrt, 1e-5, 1e-4).pass);
}

TEST_CASE("softmax output is a probability vector") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor s = math::softmax(test::random_tensor(rng, {12}, -30.0, 30.0));
    double sum = 0.0;
    for (double v : s.values()) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("gradients are linear in the objective") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    NodeRef x = g.leaf("x", test::random_tensor(rng, {5}));
    NodeRef y = g.leaf("y", test::random_tensor(rng, {5}));
    NodeRef f = g.dot(g.tanh(x), y);
    NodeRef h = g.squared_error(x, g.sigmoid(y));
    const double a = std::uniform_real_distribution<double>(-2, 2)(rng);
    const double b = std::uniform_real_distribution<double>(-2, 2)(rng);

    g.backward(f);
    Tensor fx = g.grad(x), fy = g.grad(y);
    g.backward(h);
    Tensor hx = g.grad(x), hy = g.grad(y);
    g.backward(g.add(g.scale(f, a), g.scale(h, b)));
    for (int i = 0; i < 5; ++i) {
      CHECK(g.grad(x)(i) == doctest::Approx(a * fx(i) + b * hx(i)).epsilon(1e-12));
      CHECK(g.grad(y)(i) == doctest::Approx(a * fy(i) + b * hy(i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("evaluation and gradients are bit-deterministic") {
  auto build = [](Graph& g) {
    std::mt19937_64 rng(101);
    NodeRef x = g.leaf("x", test::random_tensor(rng, {8}));
    NodeRef m = g.leaf("m", test::random_tensor(rng, {8, 8}));
    NodeRef root = g.cross_entropy(g.softmax(g.matvec(m, g.tanh(x))),
                                   g.constant(Tensor::one_hot(8, 1)));
    g.backward(root);
    return std::pair{x, root};
  };
  Graph g1, g2;
  auto [x1, r1] = build(g1);
  auto [x2, r2] = build(g2);
  CHECK(g1.value(r1) == g2.value(r2));
  CHECK(g1.grad(x1) == g2.grad(x2));
}

TEST_CASE("ratio normalization matches the plain form and rejects bad sums") {
  Graph g;
  NodeRef x = g.leaf("x", Tensor::vector({1.0, 3.0}));
  NodeRef y = g.ratio_normalize(x);
  CHECK(g.value(y)(0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(g.value(y)(1) == doctest::Approx(0.75).epsilon(1e-15));
  std::array wrt{x};
  CHECK(finite_difference_check(g, g.sum(g.tanh(y)), wrt, 1e-5, 1e-5).pass);
  CHECK_THROWS_AS(g.ratio_normalize(g.constant(Tensor::vector({1.0, -2.0}))), NumericsError);
}

TEST_CASE("index, concat and stack_cols route gradients to the right slots") {
  Graph g;
  NodeRef a = g.leaf("a", Tensor::vector({1.0, 2.0}));
  NodeRef b = g.leaf("b", Tensor::vector({3.0, 4.0}));
  NodeRef cat = g.concat(std::array{a, b});
  CHECK(g.value(cat).size() == 4);
  g.backward(g.index(cat, 3));
  CHECK(g.grad(a) == Tensor::zeros({2}));
  CHECK(g.grad(b)(0) == 0.0);
  CHECK(g.grad(b)(1) == 1.0);

  NodeRef m = g.stack_cols(std::array{a, b});
  CHECK(g.value(m)(0, 1) == 3.0);
  NodeRef w = g.leaf("w", Tensor::vector({0.5, -0.5}));
  g.backward(g.sum(g.matvec(m, w)));
  CHECK(g.grad(a)(0) == 0.5);
  CHECK(g.grad(b)(0) == -0.5);
}

TEST_CASE("grad before backward is rejected") {
  Graph g;
  NodeRef x = g.leaf("x", Tensor::scalar(1.0));
  CHECK_THROWS_AS(g.grad(x), NumericsError);
  CHECK_THROWS_AS(g.backward(g.constant(Tensor::vector({1.0, 2.0}))), ShapeError);
}
