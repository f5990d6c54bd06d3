#pragma once

#include <cstdint>
#include <vector>

#include "ssene/matrix.hpp"
#include "ssene/rng.hpp"

inline ssene::Matrix random_normal_matrix(int r, int c, ssene::Rng& rng, double scale = 1.0) {
  ssene::Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal(0.0, scale);
  return m;
}

// random head array: each node after a random root attaches to an earlier
// node of a random permutation
inline std::vector<int> random_tree_heads(int n, ssene::Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  std::vector<int> heads(static_cast<std::size_t>(n), -1);
  for (int k = 1; k < n; ++k)
    heads[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] =
        order[rng.below(static_cast<std::uint64_t>(k))];
  return heads;
}
