#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssene/rng.hpp"

namespace ssene {

struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Clamp applied inside every log of a probability.
inline constexpr double kLogEps = 1e-12;

// Dense row-major matrix of doubles. Values are immutable by convention once
// a matrix has been handed to another component; mutation happens only on
// freshly built or locally owned instances.
class Matrix {
 public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw DimensionError("matrix: negative shape");
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return Matrix();
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int i = 0; i < m.rows(); ++i) {
      if (static_cast<int>(rows[i].size()) != m.cols())
        throw DimensionError("from_rows: ragged input");
      for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  static Matrix random_normal(int rows, int cols, Rng& rng, double stddev) {
    Matrix m(rows, cols);
    for (double& v : m.data_) v = rng.normal(0.0, stddev);
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double* row_ptr(int i) { return data_.data() + static_cast<std::size_t>(i) * cols_; }
  const double* row_ptr(int i) const { return data_.data() + static_cast<std::size_t>(i) * cols_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  int rows_, cols_;
  std::vector<double> data_;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}
}  // namespace detail

// c = a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  detail::require(a.cols() == b.rows(), "matmul: inner dimensions disagree (" +
                                            std::to_string(a.cols()) + " vs " +
                                            std::to_string(b.rows()) + ")");
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    double* crow = c.row_ptr(i);
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row_ptr(k);
      for (int j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// c = a * b^T   (rows-by-rows dot products)
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  detail::require(a.cols() == b.cols(), "matmul_nt: column counts disagree");
  Matrix c(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row_ptr(i);
    for (int j = 0; j < b.rows(); ++j) {
      const double* brow = b.row_ptr(j);
      double s = 0.0;
      for (int k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
  return c;
}

// c = a^T * b   (accumulated as rank-1 updates)
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  detail::require(a.rows() == b.rows(), "matmul_tn: row counts disagree");
  Matrix c(a.cols(), b.cols());
  for (int k = 0; k < a.rows(); ++k) {
    const double* arow = a.row_ptr(k);
    const double* brow = b.row_ptr(k);
    for (int i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c.row_ptr(i);
      for (int j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// Row-wise softmax, stabilized by per-row max subtraction. Each output row
// sums to 1 and preserves the ordering of the inputs within the row.
inline Matrix softmax_rows(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    const double* in = a.row_ptr(i);
    double* o = out.row_ptr(i);
    double mx = in[0];
    for (int j = 1; j < a.cols(); ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (int j = 0; j < a.cols(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < a.cols(); ++j) o[j] *= inv;
  }
  return out;
}

// Mean over rows of -log p(target): each row of pred_probs must be a
// distribution over the vocabulary, target_ids one index per row.
inline double cross_entropy(const Matrix& pred_probs, const std::vector<int>& target_ids) {
  detail::require(static_cast<int>(target_ids.size()) == pred_probs.rows(),
                  "cross_entropy: one target per distribution row required");
  if (target_ids.empty()) return 0.0;
  double total = 0.0;
  for (int i = 0; i < pred_probs.rows(); ++i) {
    const int t = target_ids[static_cast<std::size_t>(i)];
    detail::require(t >= 0 && t < pred_probs.cols(), "cross_entropy: target id out of range");
    total -= std::log(std::max(pred_probs(i, t), kLogEps));
  }
  return total / static_cast<double>(pred_probs.rows());
}

// KL(t || x) with the 0 * log(0/.) = 0 convention; x is clamped away from 0.
inline double kl_divergence(const std::vector<double>& t, const std::vector<double>& x) {
  detail::require(t.size() == x.size(), "kl_divergence: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] <= 0.0) continue;
    total += t[i] * (std::log(t[i]) - std::log(std::max(x[i], kLogEps)));
  }
  return total;
}

// Central-difference gradient of an arbitrary scalar function of one matrix.
// Used as the independent oracle against the analytic backward pass.
inline Matrix finite_diff_grad(const std::function<double(const Matrix&)>& loss_fn,
                               const Matrix& params, double step = 1e-5) {
  Matrix grad(params.rows(), params.cols());
  Matrix probe = params;
  for (int i = 0; i < params.rows(); ++i) {
    for (int j = 0; j < params.cols(); ++j) {
      const double saved = probe(i, j);
      probe(i, j) = saved + step;
      const double up = loss_fn(probe);
      probe(i, j) = saved - step;
      const double down = loss_fn(probe);
      probe(i, j) = saved;
      grad(i, j) = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

struct AdamState {
  Matrix m;
  Matrix v;
  long long t = 0;
};

// Bias-corrected Adam update; state is created lazily on the first call.
inline void adam_step(Matrix& params, const Matrix& grads, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  detail::require(params.same_shape(grads), "adam_step: param/grad shape mismatch");
  if (state.m.size() == 0) {
    state.m = Matrix(params.rows(), params.cols());
    state.v = Matrix(params.rows(), params.cols());
    state.t = 0;
  }
  detail::require(state.m.same_shape(params), "adam_step: state shape mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  auto& p = params.data();
  const auto& g = grads.data();
  auto& m = state.m.data();
  auto& v = state.v.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace ssene
