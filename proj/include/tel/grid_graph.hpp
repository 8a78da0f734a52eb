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

#ifndef TEL_GRID_GRAPH_HPP_
#define TEL_GRID_GRAPH_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tel/tensor.hpp"

namespace tel {

struct Edge {
  std::uint32_t u;
  std::uint32_t v;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Undirected weighted edge list. Grid lists built by build_edges() remember
// their height and width; general lists (used for small test graphs) report
// zero for both.
class EdgeList {
 public:
  EdgeList() = default;

  EdgeList(std::size_t num_nodes, std::vector<Edge> edges)
      : num_nodes_(num_nodes), edges_(std::move(edges)) {
    for (const Edge& e : edges_) {
      if (e.u >= num_nodes_ || e.v >= num_nodes_ || e.u == e.v) {
        throw ArgumentError("edge (" + std::to_string(e.u) + ", " +
                            std::to_string(e.v) + ") is invalid for " +
                            std::to_string(num_nodes_) + " nodes");
      }
    }
  }

  static EdgeList grid(std::size_t height, std::size_t width,
                       std::vector<Edge> edges) {
    EdgeList list(height * width, std::move(edges));
    list.height_ = height;
    list.width_ = width;
    return list;
  }

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t size() const { return edges_.size(); }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  const Edge& operator[](std::size_t i) const { return edges_[i]; }
  std::span<const Edge> edges() const { return edges_; }

  bool has_weights() const { return !weights_.empty() || edges_.empty(); }
  std::span<const double> weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }

  void set_weights(std::vector<double> weights) {
    if (weights.size() != edges_.size()) {
      throw ArgumentError("expected " + std::to_string(edges_.size()) +
                          " edge weights, got " +
                          std::to_string(weights.size()));
    }
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0) {
        throw ArgumentError("edge weights must be finite and non-negative");
      }
    }
    weights_ = std::move(weights);
  }

 private:
  std::size_t num_nodes_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<Edge> edges_;
  std::vector<double> weights_;
};

// 4-connected grid: all horizontal edges in row-major order, then all
// vertical edges in row-major order. u < v for every edge.
inline EdgeList build_edges(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) {
    throw ArgumentError("grid dimensions must be positive");
  }
  std::vector<Edge> edges;
  edges.reserve(2 * height * width - height - width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x + 1 < width; ++x) {
      auto u = static_cast<std::uint32_t>(y * width + x);
      edges.push_back({u, u + 1});
    }
  }
  for (std::size_t y = 0; y + 1 < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      auto u = static_cast<std::uint32_t>(y * width + x);
      edges.push_back({u, static_cast<std::uint32_t>(u + width)});
    }
  }
  return EdgeList::grid(height, width, std::move(edges));
}

// Squared Euclidean distance over channels between the endpoints of each
// edge. Accumulates in double regardless of the tensor scalar type.
template <typename T>
std::vector<double> edge_weights(const DenseTensor<T>& features,
                                 const EdgeList& edges) {
  if (features.pixels() != edges.num_nodes() ||
      (edges.height() != 0 && (features.height() != edges.height() ||
                               features.width() != edges.width()))) {
    throw ArgumentError("feature tensor " + std::to_string(features.height()) +
                        "x" + std::to_string(features.width()) +
                        " does not match the edge list grid");
  }
  std::vector<double> weights(edges.size(), 0.0);
  for (std::size_t c = 0; c < features.channels(); ++c) {
    auto ch = features.channel(c);
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const double d = static_cast<double>(ch[edges[k].u]) -
                       static_cast<double>(ch[edges[k].v]);
      weights[k] += d * d;
    }
  }
  return weights;
}

// Grid graph over the tensor's pixels with edge_weights() attached.
template <typename T>
EdgeList weighted_grid(const DenseTensor<T>& features) {
  EdgeList edges = build_edges(features.height(), features.width());
  edges.set_weights(edge_weights(features, edges));
  return edges;
}

}  // namespace tel

#endif  // TEL_GRID_GRAPH_HPP_
