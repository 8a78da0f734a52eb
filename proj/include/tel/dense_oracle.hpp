// Copyright 2026 The TEL Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Brute-force O(n^2) reference for the tree filter: explicit path-sum
// distances and a dense affinity matrix. Only for verification on small
// grids.

#ifndef TEL_DENSE_ORACLE_HPP_
#define TEL_DENSE_ORACLE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tel/mst.hpp"
#include "tel/tensor.hpp"

namespace tel {

inline constexpr std::size_t kDenseOracleMaxNodes = 4096;

// Row-major n x n matrix.
struct DenseMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const {
    return values[i * n + j];
  }
  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
};

// D_ij = sum of tree.parent_edge_weight along the unique path i..j, computed
// by a depth-first walk from every source over the undirected tree.
inline DenseMatrix dense_distance(const RootedTree& tree) {
  const std::size_t n = tree.num_nodes;
  if (n > kDenseOracleMaxNodes) {
    throw CapacityError("dense distance needs n <= " +
                        std::to_string(kDenseOracleMaxNodes) + ", got " +
                        std::to_string(n));
  }
  struct Link {
    std::uint32_t to;
    double w;
  };
  std::vector<std::vector<Link>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (tree.parent[i] == kNoNode) continue;
    adj[i].push_back({tree.parent[i], tree.parent_edge_weight[i]});
    adj[tree.parent[i]].push_back({static_cast<std::uint32_t>(i),
                                   tree.parent_edge_weight[i]});
  }
  DenseMatrix d{n, std::vector<double>(n * n, 0.0)};
  std::vector<std::uint32_t> stack;
  std::vector<char> seen(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(seen.begin(), seen.end(), 0);
    stack.assign(1, static_cast<std::uint32_t>(s));
    seen[s] = 1;
    while (!stack.empty()) {
      const std::uint32_t u = stack.back();
      stack.pop_back();
      for (const Link& l : adj[u]) {
        if (seen[l.to]) continue;
        seen[l.to] = 1;
        d(s, l.to) = d(s, u) + l.w;
        stack.push_back(l.to);
      }
    }
  }
  return d;
}

// out_i = sum_j exp(-D_ij / sigma) P_j / sum_j exp(-D_ij / sigma).
template <typename T>
DenseTensor<T> dense_filter(const DenseTensor<T>& input,
                            const DenseMatrix& distance, double sigma) {
  if (input.pixels() != distance.n) {
    throw ArgumentError("distance matrix is " + std::to_string(distance.n) +
                        " nodes, tensor has " + std::to_string(input.pixels()) +
                        " pixels");
  }
  if (!(sigma > 0.0)) throw ArgumentError("sigma must be positive");
  const std::size_t n = distance.n;
  DenseTensor<T> out(input.channels(), input.height(), input.width());
  std::vector<double> affinity(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      affinity[j] = std::exp(-distance(i, j) / sigma);
      z += affinity[j];
    }
    for (std::size_t c = 0; c < input.channels(); ++c) {
      auto src = input.channel(c);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        s += affinity[j] * static_cast<double>(src[j]);
      }
      out.at(c, i) = static_cast<T>(s / z);
    }
  }
  return out;
}

}  // namespace tel

#endif  // TEL_DENSE_ORACLE_HPP_
