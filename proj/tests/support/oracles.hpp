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

// Reference implementations used only by tests. Each one is written the slow
// obvious way and shares no code with the library beyond plain data types.

#ifndef TEL_TESTS_SUPPORT_ORACLES_HPP_
#define TEL_TESTS_SUPPORT_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "tel/mst.hpp"
#include "tel/tensor.hpp"

namespace tel::oracle {

// Prim on a dense adjacency matrix of the 4-connected grid.
inline double prim_total(std::size_t h, std::size_t w,
                         const std::function<double(std::size_t, std::size_t)>& weight) {
  const std::size_t n = h * w;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best(n, inf);
  std::vector<char> in(n, 0);
  best[0] = 0.0;
  double total = 0.0;
  for (std::size_t it = 0; it < n; ++it) {
    std::size_t u = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in[i] && (u == n || best[i] < best[u])) u = i;
    }
    in[u] = 1;
    total += best[u];
    const std::size_t y = u / w, x = u % w;
    auto relax = [&](std::size_t v) {
      if (!in[v]) best[v] = std::min(best[v], weight(u, v));
    };
    if (y > 0) relax(u - w);
    if (y + 1 < h) relax(u + w);
    if (x > 0) relax(u - 1);
    if (x + 1 < w) relax(u + 1);
  }
  return total;
}

// Tree path length between every pair by climbing parents to the common
// ancestor.
inline std::vector<double> path_distances(const RootedTree& tree) {
  const std::size_t n = tree.num_nodes;
  std::vector<int> depth(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t v = static_cast<std::uint32_t>(i); tree.parent[v] != kNoNode;
         v = tree.parent[v]) {
      ++depth[i];
    }
  }
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::uint32_t a = static_cast<std::uint32_t>(i), b = static_cast<std::uint32_t>(j);
      double s = 0.0;
      while (a != b) {
        if (depth[a] >= depth[b]) {
          s += tree.parent_edge_weight[a];
          a = tree.parent[a];
        } else {
          s += tree.parent_edge_weight[b];
          b = tree.parent[b];
        }
      }
      d[i * n + j] = s;
    }
  }
  return d;
}

// Normalized filter with weights exp(-D/sigma), D from path_distances.
inline DenseTensor<double> filter(const DenseTensor<double>& input,
                                  const RootedTree& tree, double sigma) {
  const std::size_t n = tree.num_nodes;
  const auto d = path_distances(tree);
  DenseTensor<double> out(input.channels(), input.height(), input.width());
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(-d[i * n + j] / sigma);
    for (std::size_t c = 0; c < input.channels(); ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += std::exp(-d[i * n + j] / sigma) * input.at(c, j);
      out.at(c, i) = s / z;
    }
  }
  return out;
}

// For each labeled pixel, the smallest city-block distance to a pixel outside
// the image or with another value, by exhaustive search.
inline std::vector<long> brute_boundary_distance(const LabelMap& labels) {
  const long h = static_cast<long>(labels.height()), w = static_cast<long>(labels.width());
  std::vector<long> dist(labels.pixels(), 0);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y * w + x);
      if (!labels.is_labeled(i)) continue;
      long best = std::min({y + 1, x + 1, h - y, w - x});
      for (long v = 0; v < h; ++v) {
        for (long u = 0; u < w; ++u) {
          if (labels.at(static_cast<std::size_t>(v * w + u)) != labels.at(i)) {
            best = std::min(best, std::abs(v - y) + std::abs(u - x));
          }
        }
      }
      dist[i] = best;
    }
  }
  return dist;
}

inline std::vector<double> central_difference(std::vector<double>& x,
                                              const std::function<double()>& f,
                                              double h = 1e-4) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double keep = x[k];
    x[k] = keep + h;
    const double plus = f();
    x[k] = keep - h;
    const double minus = f();
    x[k] = keep;
    g[k] = (plus - minus) / (2.0 * h);
  }
  return g;
}

// max |a - b| relative to max |b|
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff = std::max(diff, std::abs(a[k] - b[k]));
    scale = std::max(scale, std::abs(b[k]));
  }
  return diff / std::max(scale, 1e-12);
}

inline DenseTensor<double> uniform(std::mt19937_64& rng, std::size_t c, std::size_t h,
                                   std::size_t w, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  DenseTensor<double> t(c, h, w);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline DenseTensor<double> simplex(std::mt19937_64& rng, std::size_t c, std::size_t h,
                                   std::size_t w) {
  DenseTensor<double> t = uniform(rng, c, h, w, 0.05, 1.0);
  for (std::size_t i = 0; i < t.pixels(); ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += t.at(k, i);
    for (std::size_t k = 0; k < c; ++k) t.at(k, i) /= z;
  }
  return t;
}

}  // namespace tel::oracle

#endif  // TEL_TESTS_SUPPORT_ORACLES_HPP_
