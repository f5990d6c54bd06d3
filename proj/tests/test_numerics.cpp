#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ssene/matrix.hpp"
#include "ssene/rng.hpp"

using namespace ssene;
using Catch::Approx;

namespace {

// independent oracle: classic i-j-k dot-product loop
Matrix matmul_naive(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("matmul identity and hand-checked products") {
  Matrix eye(2, 2);
  eye(0, 0) = eye(1, 1) = 1.0;
  Matrix a = Matrix::from_rows({{3.0, -1.0}, {2.5, 4.0}});
  REQUIRE(matmul(eye, a) == a);

  Matrix b = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  Matrix ones = Matrix::from_rows({{1.0}, {1.0}});
  Matrix prod = matmul(b, ones);
  REQUIRE(prod(0, 0) == Approx(3.0));
  REQUIRE(prod(1, 0) == Approx(7.0));
}

TEST_CASE("matmul agrees with the naive triple loop on random shapes") {
  Rng rng(11);
  Matrix a = random_matrix(5, 7, rng);
  Matrix b = random_matrix(7, 3, rng);
  Matrix got = matmul(a, b);
  Matrix want = matmul_naive(a, b);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) REQUIRE(got(i, j) == Approx(want(i, j)).margin(1e-12));
}

TEST_CASE("matmul rejects mismatched shapes") {
  Matrix a(2, 3), b(2, 3);
  REQUIRE_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transposes") {
  Rng rng(12);
  Matrix a = random_matrix(4, 6, rng);
  Matrix b = random_matrix(5, 6, rng);
  Matrix nt = matmul_nt(a, b);
  Matrix want = matmul_naive(a, transpose(b));
  for (int i = 0; i < nt.rows(); ++i)
    for (int j = 0; j < nt.cols(); ++j) REQUIRE(nt(i, j) == Approx(want(i, j)).margin(1e-12));

  Matrix c = random_matrix(6, 4, rng);
  Matrix d = random_matrix(6, 5, rng);
  Matrix tn = matmul_tn(c, d);
  Matrix want2 = matmul_naive(transpose(c), d);
  for (int i = 0; i < tn.rows(); ++i)
    for (int j = 0; j < tn.cols(); ++j) REQUIRE(tn(i, j) == Approx(want2(i, j)).margin(1e-12));
}

TEST_CASE("softmax_rows on symmetric and closed-form inputs") {
  Matrix sym = Matrix::from_rows({{0.0, 0.0}});
  Matrix out = softmax_rows(sym);
  REQUIRE(out(0, 0) == Approx(0.5));
  REQUIRE(out(0, 1) == Approx(0.5));

  Matrix two = Matrix::from_rows({{std::log(2.0), 0.0}});
  out = softmax_rows(two);
  REQUIRE(out(0, 0) == Approx(2.0 / 3.0));
  REQUIRE(out(0, 1) == Approx(1.0 / 3.0));
}

TEST_CASE("softmax_rows matches scalar oracle, rows sum to 1, order kept") {
  Rng rng(13);
  Matrix in = random_matrix(3, 3, rng);
  Matrix out = softmax_rows(in);
  for (int i = 0; i < 3; ++i) {
    // scalar exp/normalize oracle, no stabilization
    double denom = 0.0;
    for (int j = 0; j < 3; ++j) denom += std::exp(in(i, j));
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) {
      REQUIRE(out(i, j) == Approx(std::exp(in(i, j)) / denom).epsilon(1e-12));
      sum += out(i, j);
    }
    REQUIRE(sum == Approx(1.0).margin(1e-12));
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        if (in(i, a) < in(i, b)) REQUIRE(out(i, a) < out(i, b));
  }
}

TEST_CASE("softmax_rows is stable for extreme inputs") {
  Matrix in = Matrix::from_rows({{1000.0, 999.0}, {-1000.0, -1001.0}});
  Matrix out = softmax_rows(in);
  REQUIRE(out.all_finite());
  REQUIRE(out(0, 0) + out(0, 1) == Approx(1.0).margin(1e-12));
  REQUIRE(out(1, 0) + out(1, 1) == Approx(1.0).margin(1e-12));
}

TEST_CASE("cross_entropy trivial values") {
  Matrix perfect = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  REQUIRE(cross_entropy(perfect, {0, 1}) == Approx(0.0).margin(1e-12));

  Matrix half = Matrix::from_rows({{0.5, 0.5}});
  REQUIRE(cross_entropy(half, {0}) == Approx(std::log(2.0)));
}

TEST_CASE("cross_entropy matches direct summation oracle") {
  Rng rng(14);
  Matrix probs(3, 5);
  std::vector<int> targets;
  for (int i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 5; ++j) {
      probs(i, j) = rng.uniform() + 0.01;
      sum += probs(i, j);
    }
    for (int j = 0; j < 5; ++j) probs(i, j) /= sum;
    targets.push_back(static_cast<int>(rng.below(5)));
  }
  // oracle: full one-hot double sum
  double want = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) {
      const double y = targets[static_cast<std::size_t>(i)] == j ? 1.0 : 0.0;
      want -= y * std::log(probs(i, j));
    }
  want /= 3.0;
  REQUIRE(cross_entropy(probs, targets) == Approx(want).epsilon(1e-12));
}

TEST_CASE("cross_entropy clamps zero probabilities instead of producing NaN") {
  Matrix zero = Matrix::from_rows({{0.0, 1.0}});
  const double loss = cross_entropy(zero, {0});
  REQUIRE(std::isfinite(loss));
  REQUIRE(loss == Approx(-std::log(1e-12)));
}

TEST_CASE("cross_entropy is nonnegative and zero only at certainty") {
  Rng rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix probs(2, 4);
    std::vector<int> targets;
    for (int i = 0; i < 2; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 4; ++j) {
        probs(i, j) = rng.uniform() + 1e-3;
        sum += probs(i, j);
      }
      for (int j = 0; j < 4; ++j) probs(i, j) /= sum;
      targets.push_back(static_cast<int>(rng.below(4)));
    }
    REQUIRE(cross_entropy(probs, targets) > 0.0);
  }
}

TEST_CASE("kl_divergence examples and properties") {
  std::vector<double> t{0.5, 0.5};
  REQUIRE(kl_divergence(t, t) == Approx(0.0).margin(1e-15));

  std::vector<double> x{0.25, 0.75};
  const double want = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  REQUIRE(kl_divergence(t, x) == Approx(want).epsilon(1e-12));

  REQUIRE_THROWS_AS(kl_divergence(t, std::vector<double>{1.0}), DimensionError);

  Rng rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(4), q(4);
    double sp = 0.0, sq = 0.0;
    for (int i = 0; i < 4; ++i) {
      p[static_cast<std::size_t>(i)] = rng.uniform() + 1e-6;
      q[static_cast<std::size_t>(i)] = rng.uniform() + 1e-6;
      sp += p[static_cast<std::size_t>(i)];
      sq += q[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < 4; ++i) {
      p[static_cast<std::size_t>(i)] /= sp;
      q[static_cast<std::size_t>(i)] /= sq;
    }
    REQUIRE(kl_divergence(p, q) >= -1e-12);
  }
}

TEST_CASE("kl_divergence treats zero mass in t as zero contribution") {
  std::vector<double> t{0.0, 1.0};
  std::vector<double> x{0.5, 0.5};
  REQUIRE(kl_divergence(t, x) == Approx(std::log(2.0)));
}

TEST_CASE("finite_diff_grad on closed-form functions") {
  Matrix w(1, 1);
  w(0, 0) = 3.0;
  Matrix g = finite_diff_grad([](const Matrix& m) { return m(0, 0) * m(0, 0); }, w);
  REQUIRE(g(0, 0) == Approx(6.0).margin(1e-6));

  Matrix z = finite_diff_grad([](const Matrix&) { return 0.0; }, w);
  REQUIRE(z(0, 0) == 0.0);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  Matrix p = Matrix::from_rows({{1.0, -2.0}});
  Matrix before = p;
  Matrix g(1, 2);
  AdamState st;
  adam_step(p, g, st, 0.1);
  REQUIRE(p == before);
}

TEST_CASE("adam first step moves each entry by about lr in the gradient's direction") {
  Matrix p = Matrix::from_rows({{1.0, -2.0, 0.5}});
  Matrix g = Matrix::from_rows({{0.3, -0.7, 2.0}});
  AdamState st;
  const double lr = 0.01;
  Matrix before = p;
  adam_step(p, g, st, lr);
  for (int j = 0; j < 3; ++j) {
    const double moved = before(0, j) - p(0, j);
    // bias-corrected first step is lr * g / (|g| + eps'), i.e. ~lr * sign(g)
    REQUIRE(moved * g(0, j) > 0.0);
    REQUIRE(std::abs(moved) == Approx(lr).epsilon(1e-4));
  }
}

TEST_CASE("adam reproduces the scalar recurrence over two steps") {
  // scalar oracle with identical update expressions
  double m = 0.0, v = 0.0, p = 0.7;
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double grads[2] = {0.4, -1.1};
  for (int t = 1; t <= 2; ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double mhat = m / (1.0 - std::pow(b1, t));
    const double vhat = v / (1.0 - std::pow(b2, t));
    p -= lr * mhat / (std::sqrt(vhat) + eps);
  }

  Matrix pm = Matrix::from_rows({{0.7}});
  AdamState st;
  Matrix g1 = Matrix::from_rows({{0.4}});
  Matrix g2 = Matrix::from_rows({{-1.1}});
  adam_step(pm, g1, st, lr, b1, b2, eps);
  adam_step(pm, g2, st, lr, b1, b2, eps);
  REQUIRE(pm(0, 0) == Approx(p).epsilon(1e-15));
}

TEST_CASE("rng streams are deterministic and mix separates streams") {
  Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) REQUIRE(a.next_u64() == b.next_u64());
  REQUIRE(Rng::mix(1, 2) != Rng::mix(1, 3));
  REQUIRE(Rng::mix(1, 2) == Rng::mix(1, 2));
}
