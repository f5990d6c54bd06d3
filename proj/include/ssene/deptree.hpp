#pragma once

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssene {

struct TreeError : std::runtime_error {
  explicit TreeError(const std::string& what) : std::runtime_error(what) {}
};

// Dependency tree over n tokens: heads[i] is the parent of token i,
// -1 marks the single root. Labels are opaque and optional.
struct DepTree {
  int n = 0;
  std::vector<int> heads;
  std::vector<std::string> labels;

  int root() const {
    for (int i = 0; i < n; ++i)
      if (heads[static_cast<std::size_t>(i)] < 0) return i;
    return -1;
  }
};

// Symmetric integer edge-count distances with zero diagonal.
struct DistanceMatrix {
  int n = 0;
  std::vector<int> d;

  DistanceMatrix() = default;
  explicit DistanceMatrix(int size, int fill = 0)
      : n(size), d(static_cast<std::size_t>(size) * size, fill) {}

  int& at(int i, int j) { return d[static_cast<std::size_t>(i) * n + j]; }
  int at(int i, int j) const { return d[static_cast<std::size_t>(i) * n + j]; }

  int max_value() const {
    int mx = 0;
    for (int v : d) mx = std::max(mx, v);
    return mx;
  }
};

// Checks structure: exactly one root, no cycles, heads in range. Rejections
// name the offending token index.
inline DepTree validate_tree(const std::vector<int>& heads,
                             const std::vector<std::string>& labels = {}) {
  if (heads.empty()) throw TreeError("tree: empty head list");
  const int n = static_cast<int>(heads.size());
  int root = -1;
  for (int i = 0; i < n; ++i) {
    const int h = heads[static_cast<std::size_t>(i)];
    if (h == -1) {
      if (root >= 0)
        throw TreeError("tree: multiple roots (tokens " + std::to_string(root) + " and " +
                        std::to_string(i) + ")");
      root = i;
    } else if (h < 0 || h >= n) {
      throw TreeError("tree: head out of range at token " + std::to_string(i));
    } else if (h == i) {
      throw TreeError("tree: token " + std::to_string(i) + " is its own head");
    }
  }
  if (root < 0) throw TreeError("tree: no root");
  // every token must reach the root without revisiting
  for (int i = 0; i < n; ++i) {
    int cur = i, steps = 0;
    while (cur != -1) {
      cur = heads[static_cast<std::size_t>(cur)];
      if (++steps > n) throw TreeError("tree: cycle involving token " + std::to_string(i));
    }
  }
  DepTree t;
  t.n = n;
  t.heads = heads;
  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != n) throw TreeError("tree: label count mismatch");
    t.labels = labels;
  }
  return t;
}

// Pairwise path lengths on the undirected tree, via depths and lowest
// common ancestors: d(i,j) = depth(i) + depth(j) - 2*depth(lca).
inline DistanceMatrix tree_distances(const DepTree& tree) {
  const int n = tree.n;
  std::vector<int> depth(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    int cur = i, d = 0;
    while (tree.heads[static_cast<std::size_t>(cur)] != -1) {
      cur = tree.heads[static_cast<std::size_t>(cur)];
      ++d;
    }
    depth[static_cast<std::size_t>(i)] = d;
  }
  DistanceMatrix out(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      int a = i, b = j;
      while (depth[static_cast<std::size_t>(a)] > depth[static_cast<std::size_t>(b)])
        a = tree.heads[static_cast<std::size_t>(a)];
      while (depth[static_cast<std::size_t>(b)] > depth[static_cast<std::size_t>(a)])
        b = tree.heads[static_cast<std::size_t>(b)];
      while (a != b) {
        a = tree.heads[static_cast<std::size_t>(a)];
        b = tree.heads[static_cast<std::size_t>(b)];
      }
      const int dij = depth[static_cast<std::size_t>(i)] + depth[static_cast<std::size_t>(j)] -
                      2 * depth[static_cast<std::size_t>(a)];
      out.at(i, j) = dij;
      out.at(j, i) = dij;
    }
  }
  return out;
}

// Expands a word-level distance matrix to model positions. Positions listed
// in `special_positions` (indices in the output coordinate system) carry no
// tree information; every pair involving one gets diameter+1, the weakest
// association the transform can express.
inline DistanceMatrix align_to_model_positions(const DistanceMatrix& d,
                                               const std::set<int>& special_positions) {
  const int out_n = d.n + static_cast<int>(special_positions.size());
  for (int p : special_positions)
    if (p < 0 || p >= out_n) throw TreeError("align: special position out of range");
  const int far = d.max_value() + 1;
  std::vector<int> word_of(static_cast<std::size_t>(out_n), -1);
  int next_word = 0;
  for (int p = 0; p < out_n; ++p)
    if (!special_positions.count(p)) word_of[static_cast<std::size_t>(p)] = next_word++;
  DistanceMatrix out(out_n);
  for (int i = 0; i < out_n; ++i) {
    for (int j = 0; j < out_n; ++j) {
      const int wi = word_of[static_cast<std::size_t>(i)];
      const int wj = word_of[static_cast<std::size_t>(j)];
      out.at(i, j) = (wi < 0 || wj < 0) ? far : d.at(wi, wj);
    }
  }
  return out;
}

}  // namespace ssene
