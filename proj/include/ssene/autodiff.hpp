#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ssene/matrix.hpp"

namespace ssene {

// Reverse-mode differentiation over Matrix values.
//
// A Tape owns one forward computation. Nodes are appended in evaluation
// order, so walking them backwards is a valid topological order for
// backpropagation. Leaves are differentiable inputs (parameters);
// constants never receive gradient.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Var leaf(Matrix value) { return push(std::move(value), nullptr); }
  Var constant(Matrix value) {
    Var v = push(std::move(value), nullptr);
    nodes_[v.id].grad_flows = false;
    return v;
  }

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

  // ---- differentiable operations ----

  Var matmul(Var a, Var b) {
    Var out = push(ssene::matmul(value(a), value(b)), nullptr);
    nodes_[out.id].backward = [this, a, b, out] {
      const Matrix& g = nodes_[out.id].grad;
      if (flows(a)) add_into(nodes_[a.id].grad, ssene::matmul_nt(g, value(b)));
      if (flows(b)) add_into(nodes_[b.id].grad, ssene::matmul_tn(value(a), g));
    };
    return out;
  }

  // a * b^T, the attention-score form
  Var matmul_nt(Var a, Var b) {
    Var out = push(ssene::matmul_nt(value(a), value(b)), nullptr);
    nodes_[out.id].backward = [this, a, b, out] {
      const Matrix& g = nodes_[out.id].grad;
      if (flows(a)) add_into(nodes_[a.id].grad, ssene::matmul(g, value(b)));
      if (flows(b)) add_into(nodes_[b.id].grad, ssene::matmul_tn(g, value(a)));
    };
    return out;
  }

  Var add(Var a, Var b) {
    detail::require(value(a).same_shape(value(b)), "tape add: shape mismatch");
    Matrix v = value(a);
    add_into(v, value(b));
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backward = [this, a, b, out] {
      const Matrix& g = nodes_[out.id].grad;
      if (flows(a)) add_into(nodes_[a.id].grad, g);
      if (flows(b)) add_into(nodes_[b.id].grad, g);
    };
    return out;
  }

  Var scale(Var a, double c) {
    Matrix v = value(a);
    for (double& x : v.data()) x *= c;
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backward = [this, a, c, out] {
      if (!flows(a)) return;
      const Matrix& g = nodes_[out.id].grad;
      auto& ga = nodes_[a.id].grad.data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * g.data()[i];
    };
    return out;
  }

  // Elementwise product with a fixed matrix (the association-matrix path:
  // the mask is data, not a learnable quantity).
  Var hadamard_const(Var a, const Matrix& m) {
    detail::require(value(a).same_shape(m), "hadamard_const: shape mismatch");
    Matrix v = value(a);
    for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] *= m.data()[i];
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backward = [this, a, m, out] {
      if (!flows(a)) return;
      const Matrix& g = nodes_[out.id].grad;
      auto& ga = nodes_[a.id].grad.data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += m.data()[i] * g.data()[i];
    };
    return out;
  }

  // x (n x d) plus a broadcast row vector (1 x d)
  Var add_row(Var x, Var row) {
    detail::require(value(row).rows() == 1 && value(row).cols() == value(x).cols(),
                    "add_row: need 1 x cols bias");
    Matrix v = value(x);
    for (int i = 0; i < v.rows(); ++i)
      for (int j = 0; j < v.cols(); ++j) v(i, j) += value(row)(0, j);
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backward = [this, x, row, out] {
      const Matrix& g = nodes_[out.id].grad;
      if (flows(x)) add_into(nodes_[x.id].grad, g);
      if (flows(row)) {
        Matrix& gr = nodes_[row.id].grad;
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
      }
    };
    return out;
  }

  // tanh-form gelu; smooth everywhere, which keeps the finite-difference
  // oracle meaningful at every point
  Var gelu(Var a) {
    const Matrix& x = value(a);
    Matrix v(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) v.data()[i] = gelu_scalar(x.data()[i]);
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backward = [this, a, out] {
      if (!flows(a)) return;
      const Matrix& g = nodes_[out.id].grad;
      const Matrix& x = nodes_[a.id].value;
      auto& ga = nodes_[a.id].grad.data();
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga[i] += gelu_grad_scalar(x.data()[i]) * g.data()[i];
    };
    return out;
  }

  // Row softmax; `additive_mask` (0 / -inf-like) is applied before the
  // exponentiation when provided.
  Var softmax_rows(Var a, const Matrix* additive_mask = nullptr) {
    Matrix pre = value(a);
    if (additive_mask) {
      detail::require(pre.same_shape(*additive_mask), "softmax mask: shape mismatch");
      add_into(pre, *additive_mask);
    }
    Var out = push(ssene::softmax_rows(pre), nullptr);
    nodes_[out.id].backward = [this, a, out] {
      if (!flows(a)) return;
      const Matrix& y = nodes_[out.id].value;
      const Matrix& g = nodes_[out.id].grad;
      Matrix& ga = nodes_[a.id].grad;
      for (int i = 0; i < y.rows(); ++i) {
        double dot = 0.0;
        for (int j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
        for (int j = 0; j < y.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
      }
    };
    return out;
  }

  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
    const Matrix& in = value(x);
    const int d = in.cols();
    detail::require(value(gain).rows() == 1 && value(gain).cols() == d &&
                        value(bias).rows() == 1 && value(bias).cols() == d,
                    "layer_norm: gain/bias must be 1 x d");
    Matrix normed(in.rows(), d);
    std::vector<double> inv_sigma(static_cast<std::size_t>(in.rows()));
    for (int i = 0; i < in.rows(); ++i) {
      double mu = 0.0;
      for (int j = 0; j < d; ++j) mu += in(i, j);
      mu /= d;
      double var = 0.0;
      for (int j = 0; j < d; ++j) {
        const double c = in(i, j) - mu;
        var += c * c;
      }
      var /= d;
      const double inv = 1.0 / std::sqrt(var + eps);
      inv_sigma[static_cast<std::size_t>(i)] = inv;
      for (int j = 0; j < d; ++j) normed(i, j) = (in(i, j) - mu) * inv;
    }
    Matrix v(in.rows(), d);
    for (int i = 0; i < in.rows(); ++i)
      for (int j = 0; j < d; ++j) v(i, j) = normed(i, j) * value(gain)(0, j) + value(bias)(0, j);
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backward = [this, x, gain, bias, out, normed, inv_sigma] {
      const Matrix& g = nodes_[out.id].grad;
      const int d = g.cols();
      if (flows(gain)) {
        Matrix& gg = nodes_[gain.id].grad;
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < d; ++j) gg(0, j) += g(i, j) * normed(i, j);
      }
      if (flows(bias)) {
        Matrix& gb = nodes_[bias.id].grad;
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < d; ++j) gb(0, j) += g(i, j);
      }
      if (flows(x)) {
        const Matrix& gainv = nodes_[gain.id].value;
        Matrix& gx = nodes_[x.id].grad;
        for (int i = 0; i < g.rows(); ++i) {
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          std::vector<double> dxhat(static_cast<std::size_t>(d));
          for (int j = 0; j < d; ++j) {
            dxhat[static_cast<std::size_t>(j)] = g(i, j) * gainv(0, j);
            mean_dxhat += dxhat[static_cast<std::size_t>(j)];
            mean_dxhat_xhat += dxhat[static_cast<std::size_t>(j)] * normed(i, j);
          }
          mean_dxhat /= d;
          mean_dxhat_xhat /= d;
          const double inv = inv_sigma[static_cast<std::size_t>(i)];
          for (int j = 0; j < d; ++j)
            gx(i, j) += inv * (dxhat[static_cast<std::size_t>(j)] - mean_dxhat -
                               normed(i, j) * mean_dxhat_xhat);
        }
      }
    };
    return out;
  }

  // Select rows of `table` by index; gradient scatters back into the table.
  Var gather_rows(Var table, const std::vector<int>& ids) {
    const Matrix& t = value(table);
    Matrix v(static_cast<int>(ids.size()), t.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      detail::require(ids[i] >= 0 && ids[i] < t.rows(), "gather_rows: index out of range");
      for (int j = 0; j < t.cols(); ++j) v(static_cast<int>(i), j) = t(ids[i], j);
    }
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backward = [this, table, ids, out] {
      if (!flows(table)) return;
      const Matrix& g = nodes_[out.id].grad;
      Matrix& gt = nodes_[table.id].grad;
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < g.cols(); ++j) gt(ids[i], j) += g(static_cast<int>(i), j);
    };
    return out;
  }

  Var mean_rows(Var x) {
    const Matrix& in = value(x);
    detail::require(in.rows() >= 1, "mean_rows: empty input");
    Matrix v(1, in.cols());
    for (int i = 0; i < in.rows(); ++i)
      for (int j = 0; j < in.cols(); ++j) v(0, j) += in(i, j);
    for (int j = 0; j < in.cols(); ++j) v(0, j) /= in.rows();
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backward = [this, x, out] {
      if (!flows(x)) return;
      const Matrix& g = nodes_[out.id].grad;
      Matrix& gx = nodes_[x.id].grad;
      const double inv = 1.0 / gx.rows();
      for (int i = 0; i < gx.rows(); ++i)
        for (int j = 0; j < gx.cols(); ++j) gx(i, j) += g(0, j) * inv;
    };
    return out;
  }

  Var slice_cols(Var x, int c0, int c1) {
    const Matrix& in = value(x);
    detail::require(0 <= c0 && c0 < c1 && c1 <= in.cols(), "slice_cols: bad range");
    Matrix v(in.rows(), c1 - c0);
    for (int i = 0; i < in.rows(); ++i)
      for (int j = c0; j < c1; ++j) v(i, j - c0) = in(i, j);
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backward = [this, x, c0, c1, out] {
      if (!flows(x)) return;
      const Matrix& g = nodes_[out.id].grad;
      Matrix& gx = nodes_[x.id].grad;
      for (int i = 0; i < g.rows(); ++i)
        for (int j = c0; j < c1; ++j) gx(i, j) += g(i, j - c0);
    };
    return out;
  }

  Var concat_cols(const std::vector<Var>& parts) {
    detail::require(!parts.empty(), "concat_cols: empty");
    int total = 0;
    const int rows = value(parts[0]).rows();
    for (Var p : parts) {
      detail::require(value(p).rows() == rows, "concat_cols: row counts disagree");
      total += value(p).cols();
    }
    Matrix v(rows, total);
    int off = 0;
    for (Var p : parts) {
      const Matrix& pv = value(p);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < pv.cols(); ++j) v(i, off + j) = pv(i, j);
      off += pv.cols();
    }
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backward = [this, parts, out] {
      const Matrix& g = nodes_[out.id].grad;
      int off = 0;
      for (Var p : parts) {
        const int w = nodes_[p.id].value.cols();
        if (flows(p)) {
          Matrix& gp = nodes_[p.id].grad;
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < w; ++j) gp(i, j) += g(i, off + j);
        }
        off += w;
      }
    };
    return out;
  }

  // Mean over rows of -log p(target). Output is a 1x1 scalar node.
  Var cross_entropy(Var probs, const std::vector<int>& target_ids) {
    const Matrix& p = value(probs);
    detail::require(static_cast<int>(target_ids.size()) == p.rows(),
                    "cross_entropy: one target per row required");
    Matrix v(1, 1);
    v(0, 0) = ssene::cross_entropy(p, target_ids);
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backward = [this, probs, target_ids, out] {
      if (!flows(probs)) return;
      const double gs = nodes_[out.id].grad(0, 0);
      const Matrix& p = nodes_[probs.id].value;
      Matrix& gp = nodes_[probs.id].grad;
      const double invn = 1.0 / p.rows();
      for (int i = 0; i < p.rows(); ++i) {
        const int t = target_ids[static_cast<std::size_t>(i)];
        gp(i, t) -= gs * invn / std::max(p(i, t), kLogEps);
      }
    };
    return out;
  }

  // KL(t || x) between two 1 x d distribution nodes; 1x1 scalar output.
  Var kl_divergence(Var t, Var x) {
    const Matrix& tv = value(t);
    const Matrix& xv = value(x);
    detail::require(tv.rows() == 1 && xv.rows() == 1 && tv.cols() == xv.cols(),
                    "kl_divergence: need matching 1 x d rows");
    Matrix v(1, 1);
    v(0, 0) = ssene::kl_divergence(tv.data(), xv.data());
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backward = [this, t, x, out] {
      const double gs = nodes_[out.id].grad(0, 0);
      const Matrix& tv = nodes_[t.id].value;
      const Matrix& xv = nodes_[x.id].value;
      for (int j = 0; j < tv.cols(); ++j) {
        const double tj = tv(0, j);
        const double xj = std::max(xv(0, j), kLogEps);
        if (flows(t) && tj > 0.0) nodes_[t.id].grad(0, j) += gs * (std::log(tj / xj) + 1.0);
        if (flows(x) && xv(0, j) >= kLogEps) nodes_[x.id].grad(0, j) -= gs * tj / xj;
      }
    };
    return out;
  }

  // ---- backward pass ----

  void backward(Var loss) {
    detail::require(value(loss).rows() == 1 && value(loss).cols() == 1,
                    "backward: loss must be scalar");
    nodes_[loss.id].grad(0, 0) = 1.0;
    for (int i = loss.id; i >= 0; --i)
      if (nodes_[i].backward) nodes_[i].backward();
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> backward;
    bool grad_flows = true;
  };

  bool flows(Var v) const { return nodes_[v.id].grad_flows; }

  Var push(Matrix value, std::function<void()> backward) {
    Node n;
    n.grad = Matrix(value.rows(), value.cols());
    n.value = std::move(value);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  static void add_into(Matrix& dst, const Matrix& src) {
    auto& d = dst.data();
    const auto& s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  }

  static double gelu_scalar(double x) {
    const double c = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
  }
  static double gelu_grad_scalar(double x) {
    const double c = 0.7978845608028654;
    const double u = c * (x + 0.044715 * x * x * x);
    const double th = std::tanh(u);
    const double du = c * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
  }

  std::vector<Node> nodes_;
};

using Var = Tape::Var;

}  // namespace ssene
