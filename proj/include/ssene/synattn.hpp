#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "ssene/autodiff.hpp"
#include "ssene/deptree.hpp"
#include "ssene/matrix.hpp"
#include "ssene/rng.hpp"

namespace ssene {

// Parameters of the distance transform f(d) = gamma1 / (gamma2 + d).
struct TransformParams {
  double gamma1 = 2.0;
  double gamma2 = 0.5;

  void check() const {
    if (!(gamma1 > 0.0) || !(gamma2 > 0.0))
      throw std::invalid_argument("transform params must be positive");
  }
};

// Strictly decreasing in d; positive for all d >= 0.
inline double transform_f(double d, const TransformParams& p) {
  return p.gamma1 / (p.gamma2 + d);
}

// Syntactic association matrix: row softmax of f applied to tree distances.
// Rows sum to 1; within a row, closer tokens get strictly larger scores.
inline Matrix assoc_matrix(const DistanceMatrix& d, const TransformParams& p) {
  p.check();
  Matrix scores(d.n, d.n);
  for (int i = 0; i < d.n; ++i)
    for (int j = 0; j < d.n; ++j) scores(i, j) = transform_f(d.at(i, j), p);
  return softmax_rows(scores);
}

enum class MatrixKind { paper, random, noisy };

inline MatrixKind matrix_kind_from_string(const std::string& s) {
  if (s == "paper") return MatrixKind::paper;
  if (s == "random") return MatrixKind::random;
  if (s == "noisy") return MatrixKind::noisy;
  throw std::invalid_argument("unknown matrix kind: " + s);
}

inline std::string to_string(MatrixKind k) {
  switch (k) {
    case MatrixKind::paper: return "paper";
    case MatrixKind::random: return "random";
    case MatrixKind::noisy: return "noisy";
  }
  return "?";
}

// Perturbation-study variants. `noise_var` is a variance; draws are seeded
// so a (kind, seed) pair is reproducible. Every variant stays row-stochastic.
inline Matrix matrix_variant(MatrixKind kind, const DistanceMatrix& d, const TransformParams& p,
                             std::uint64_t seed, double noise_var = 0.01) {
  switch (kind) {
    case MatrixKind::paper:
      return assoc_matrix(d, p);
    case MatrixKind::random: {
      Rng rng(seed);
      Matrix scores(d.n, d.n);
      for (double& v : scores.data()) v = rng.normal();
      return softmax_rows(scores);
    }
    case MatrixKind::noisy: {
      p.check();
      if (noise_var < 0.0) throw std::invalid_argument("noise variance must be >= 0");
      Rng rng(seed);
      const double sd = std::sqrt(noise_var);
      Matrix scores(d.n, d.n);
      for (int i = 0; i < d.n; ++i)
        for (int j = 0; j < d.n; ++j)
          scores(i, j) = transform_f(d.at(i, j), p) + rng.normal(0.0, sd);
      return softmax_rows(scores);
    }
  }
  throw std::logic_error("unreachable");
}

// Dependency attention: softmax(Q K^T ⊙ M) V. No 1/sqrt(d) scaling — M is
// already row-normalized. M is a constant; gradient flows into Q, K, V only.
inline Var dep_attention(Tape& tape, Var q, Var k, Var v, const Matrix& m) {
  Var scores = tape.matmul_nt(q, k);
  Var biased = tape.hadamard_const(scores, m);
  Var attn = tape.softmax_rows(biased);
  return tape.matmul(attn, v);
}

// Standard scaled dot-product attention, optionally causal.
inline Var self_attention(Tape& tape, Var q, Var k, Var v, bool causal = false) {
  const int d_head = tape.value(q).cols();
  Var scores = tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d_head)));
  if (causal) {
    const int n = tape.value(scores).rows();
    const int nk = tape.value(scores).cols();
    Matrix mask(n, nk);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < nk; ++j) mask(i, j) = -1e30;
    Var attn = tape.softmax_rows(scores, &mask);
    return tape.matmul(attn, v);
  }
  Var attn = tape.softmax_rows(scores);
  return tape.matmul(attn, v);
}

// CSV dump, one matrix row per line, 9 significant digits.
inline void export_attention(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write attention file: " + path);
  char buf[64];
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.9g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
}

}  // namespace ssene
