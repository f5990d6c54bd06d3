#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "gradcheck.hpp"
#include "ssene/autodiff.hpp"
#include "ssene/matrix.hpp"
#include "ssene/rng.hpp"

using namespace ssene;
using Catch::Approx;

namespace {

Matrix random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal(0.0, scale);
  return m;
}

// Checks d(loss)/d(input) for a graph builder that maps one leaf to a scalar.
void check_input_grad(const Matrix& input,
                      const std::function<Var(Tape&, Var)>& build) {
  Tape tape;
  Var leaf = tape.leaf(input);
  Var loss = build(tape, leaf);
  REQUIRE(tape.value(loss).rows() == 1);
  REQUIRE(tape.value(loss).cols() == 1);
  tape.backward(loss);
  const Matrix analytic = tape.grad(leaf);
  REQUIRE(analytic.rows() == input.rows());
  REQUIRE(analytic.cols() == input.cols());
  const Matrix numeric = finite_diff_grad(
      [&](const Matrix& probe) {
        Tape t2;
        Var l2 = t2.leaf(probe);
        return t2.value(build(t2, l2))(0, 0);
      },
      input);
  require_grads_close(analytic, numeric);
}

}  // namespace

TEST_CASE("matmul gradient flows to both operands") {
  Rng rng(21);
  const Matrix a0 = random_matrix(3, 4, rng);
  const Matrix b0 = random_matrix(4, 2, rng);
  Rng wrng(99);
  const Matrix w = random_matrix(3, 2, wrng);

  Tape t;
  Var a = t.leaf(a0);
  Var b = t.leaf(b0);
  Var out = t.hadamard_const(t.matmul(a, b), w);
  Var rows = t.matmul(out, t.constant(Matrix(2, 1, 1.0)));
  Var loss = t.matmul(t.constant(Matrix(1, 3, 1.0)), rows);
  t.backward(loss);

  const Matrix na = finite_diff_grad(
      [&](const Matrix& probe) {
        Tape t2;
        Var o = t2.hadamard_const(t2.matmul(t2.leaf(probe), t2.leaf(b0)), w);
        Var r = t2.matmul(o, t2.constant(Matrix(2, 1, 1.0)));
        return t2.value(t2.matmul(t2.constant(Matrix(1, 3, 1.0)), r))(0, 0);
      },
      a0);
  const Matrix nb = finite_diff_grad(
      [&](const Matrix& probe) {
        Tape t2;
        Var o = t2.hadamard_const(t2.matmul(t2.leaf(a0), t2.leaf(probe)), w);
        Var r = t2.matmul(o, t2.constant(Matrix(2, 1, 1.0)));
        return t2.value(t2.matmul(t2.constant(Matrix(1, 3, 1.0)), r))(0, 0);
      },
      b0);
  require_grads_close(t.grad(a), na);
  require_grads_close(t.grad(b), nb);
}

TEST_CASE("matmul_nt gradient") {
  Rng rng(22);
  const Matrix b0 = random_matrix(5, 4, rng);
  Rng wrng(101);
  const Matrix w = random_matrix(3, 5, wrng);
  check_input_grad(random_matrix(3, 4, rng), [&](Tape& t, Var x) {
    Var out = t.hadamard_const(t.matmul_nt(x, t.leaf(b0)), w);
    Var rows = t.matmul(out, t.constant(Matrix(5, 1, 1.0)));
    return t.matmul(t.constant(Matrix(1, 3, 1.0)), rows);
  });
}

TEST_CASE("add, scale and add_row gradients") {
  Rng rng(23);
  const Matrix other = random_matrix(3, 3, rng);
  Rng wrng(102);
  const Matrix w = random_matrix(3, 3, wrng);
  check_input_grad(random_matrix(3, 3, rng), [&](Tape& t, Var x) {
    Var out = t.add(t.scale(x, -1.7), t.leaf(other));
    out = t.hadamard_const(out, w);
    Var rows = t.matmul(out, t.constant(Matrix(3, 1, 1.0)));
    return t.matmul(t.constant(Matrix(1, 3, 1.0)), rows);
  });

  // bias vector side of add_row
  const Matrix x0 = random_matrix(4, 3, rng);
  check_input_grad(random_matrix(1, 3, rng), [&](Tape& t, Var bias) {
    Var out = t.add_row(t.leaf(x0), bias);
    out = t.hadamard_const(out, Matrix(4, 3, 0.5));
    Var rows = t.matmul(out, t.constant(Matrix(3, 1, 1.0)));
    return t.matmul(t.constant(Matrix(1, 4, 1.0)), rows);
  });
}

TEST_CASE("gelu gradient is smooth") {
  Rng rng(24);
  Rng wrng(103);
  const Matrix w = random_matrix(3, 4, wrng);
  check_input_grad(random_matrix(3, 4, rng), [&](Tape& t, Var x) {
    Var out = t.hadamard_const(t.gelu(x), w);
    Var rows = t.matmul(out, t.constant(Matrix(4, 1, 1.0)));
    return t.matmul(t.constant(Matrix(1, 3, 1.0)), rows);
  });
}

TEST_CASE("softmax_rows gradient, plain and masked") {
  Rng rng(25);
  Rng wrng(104);
  const Matrix w = random_matrix(3, 3, wrng);
  check_input_grad(random_matrix(3, 3, rng), [&](Tape& t, Var x) {
    Var out = t.hadamard_const(t.softmax_rows(x), w);
    Var rows = t.matmul(out, t.constant(Matrix(3, 1, 1.0)));
    return t.matmul(t.constant(Matrix(1, 3, 1.0)), rows);
  });

  Matrix mask(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) mask(i, j) = -1e30;
  check_input_grad(random_matrix(3, 3, rng), [&](Tape& t, Var x) {
    Var out = t.hadamard_const(t.softmax_rows(x, &mask), w);
    Var rows = t.matmul(out, t.constant(Matrix(3, 1, 1.0)));
    return t.matmul(t.constant(Matrix(1, 3, 1.0)), rows);
  });
}

TEST_CASE("masked softmax zeroes masked positions and their gradients") {
  Matrix in = Matrix::from_rows({{0.3, 0.9}});
  Matrix mask = Matrix::from_rows({{0.0, -1e30}});
  Tape t;
  Var x = t.leaf(in);
  Var out = t.softmax_rows(x, &mask);
  REQUIRE(t.value(out)(0, 0) == Approx(1.0));
  REQUIRE(t.value(out)(0, 1) == Approx(0.0).margin(1e-300));
}

TEST_CASE("layer_norm gradients for input, gain and bias") {
  Rng rng(26);
  const Matrix x0 = random_matrix(3, 5, rng);
  const Matrix g0 = random_matrix(1, 5, rng, 0.3);
  const Matrix b0 = random_matrix(1, 5, rng, 0.3);
  Rng wrng(105);
  const Matrix w = random_matrix(3, 5, wrng);

  const auto build = [&](Tape& t, Var x, Var g, Var b) {
    Var out = t.hadamard_const(t.layer_norm(x, g, b), w);
    Var rows = t.matmul(out, t.constant(Matrix(5, 1, 1.0)));
    return t.matmul(t.constant(Matrix(1, 3, 1.0)), rows);
  };

  Tape t;
  Var x = t.leaf(x0);
  Var g = t.leaf(g0);
  Var b = t.leaf(b0);
  t.backward(build(t, x, g, b));

  const auto fd = [&](const Matrix& probe, int which) {
    return finite_diff_grad(
        [&](const Matrix& p) {
          Tape t2;
          Var xs = t2.leaf(which == 0 ? p : x0);
          Var gs = t2.leaf(which == 1 ? p : g0);
          Var bs = t2.leaf(which == 2 ? p : b0);
          return t2.value(build(t2, xs, gs, bs))(0, 0);
        },
        probe);
  };
  require_grads_close(t.grad(x), fd(x0, 0));
  require_grads_close(t.grad(g), fd(g0, 1));
  require_grads_close(t.grad(b), fd(b0, 2));
}

TEST_CASE("gather_rows scatters gradient into the table") {
  Rng rng(27);
  Rng wrng(106);
  const Matrix w = random_matrix(4, 3, wrng);
  const std::vector<int> ids{2, 0, 2, 1};  // repeated row accumulates twice
  check_input_grad(random_matrix(3, 3, rng), [&](Tape& t, Var table) {
    Var out = t.hadamard_const(t.gather_rows(table, ids), w);
    Var rows = t.matmul(out, t.constant(Matrix(3, 1, 1.0)));
    return t.matmul(t.constant(Matrix(1, 4, 1.0)), rows);
  });
}

TEST_CASE("mean_rows, slice_cols and concat_cols gradients") {
  Rng rng(28);
  Rng wrng(107);
  const Matrix w = random_matrix(1, 6, wrng);
  check_input_grad(random_matrix(4, 6, rng), [&](Tape& t, Var x) {
    Var out = t.hadamard_const(t.mean_rows(x), w);
    return t.matmul(out, t.constant(Matrix(6, 1, 1.0)));
  });

  const Matrix w2 = random_matrix(4, 4, wrng);
  check_input_grad(random_matrix(4, 6, rng), [&](Tape& t, Var x) {
    Var left = t.slice_cols(x, 0, 2);
    Var mid = t.slice_cols(x, 2, 4);
    Var out = t.hadamard_const(t.concat_cols({mid, left}), w2);
    Var rows = t.matmul(out, t.constant(Matrix(4, 1, 1.0)));
    return t.matmul(t.constant(Matrix(1, 4, 1.0)), rows);
  });
}

TEST_CASE("cross_entropy node gradient") {
  Rng rng(29);
  Matrix logits = random_matrix(3, 5, rng);
  const std::vector<int> targets{1, 4, 0};
  check_input_grad(logits, [&](Tape& t, Var x) {
    return t.cross_entropy(t.softmax_rows(x), targets);
  });
}

TEST_CASE("kl_divergence node gradient w.r.t. both distributions") {
  Rng rng(30);
  const Matrix a0 = random_matrix(1, 6, rng);
  const Matrix b0 = random_matrix(1, 6, rng);

  const auto build = [&](Tape& t, Var a, Var b) {
    return t.kl_divergence(t.softmax_rows(a), t.softmax_rows(b));
  };
  Tape t;
  Var a = t.leaf(a0);
  Var b = t.leaf(b0);
  t.backward(build(t, a, b));
  const Matrix na = finite_diff_grad(
      [&](const Matrix& p) {
        Tape t2;
        return t2.value(build(t2, t2.leaf(p), t2.leaf(b0)))(0, 0);
      },
      a0);
  const Matrix nb = finite_diff_grad(
      [&](const Matrix& p) {
        Tape t2;
        return t2.value(build(t2, t2.leaf(a0), t2.leaf(p)))(0, 0);
      },
      b0);
  require_grads_close(t.grad(a), na);
  require_grads_close(t.grad(b), nb);
}

TEST_CASE("gradients match value shapes after backward") {
  Rng rng(31);
  Tape t;
  Var x = t.leaf(random_matrix(2, 3, rng));
  Var y = t.softmax_rows(x);
  Var rows = t.matmul(y, t.constant(Matrix(3, 1, 1.0)));
  Var loss = t.matmul(t.constant(Matrix(1, 2, 1.0)), rows);
  t.backward(loss);
  REQUIRE(t.grad(x).rows() == t.value(x).rows());
  REQUIRE(t.grad(x).cols() == t.value(x).cols());
  REQUIRE(t.grad(y).rows() == 2);
  REQUIRE(t.grad(y).cols() == 3);
}

TEST_CASE("constants do not accumulate gradient") {
  Tape t;
  Var c = t.constant(Matrix(2, 2, 1.0));
  Var x = t.leaf(Matrix(2, 2, 0.5));
  Var out = t.add(x, c);
  Var rows = t.matmul(out, t.constant(Matrix(2, 1, 1.0)));
  Var loss = t.matmul(t.constant(Matrix(1, 2, 1.0)), rows);
  t.backward(loss);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      REQUIRE(t.grad(c)(i, j) == 0.0);
      REQUIRE(t.grad(x)(i, j) == 1.0);
    }
}
