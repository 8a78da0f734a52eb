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

#ifndef TEL_MST_HPP_
#define TEL_MST_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tel/grid_graph.hpp"
#include "tel/tensor.hpp"

namespace tel {

inline constexpr std::uint32_t kNoNode = std::numeric_limits<std::uint32_t>::max();

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }

  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      std::uint32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> size_;
};

inline void require_weights(std::size_t num_nodes, const EdgeList& edges) {
  if (!edges.has_weights()) {
    throw ArgumentError("MST construction needs edge weights");
  }
  if (num_nodes != edges.num_nodes()) {
    throw ArgumentError("num_nodes does not match the edge list");
  }
  if (num_nodes == 0) throw ArgumentError("graph has no nodes");
}

}  // namespace detail

// Minimum spanning tree by Boruvka rounds. Edges are compared by
// (weight, edge index), a strict total order, so the result is the unique
// MST under that order: the same edges Kruskal picks after a stable sort.
// Returns the chosen edge indices in ascending order.
inline std::vector<std::uint32_t> boruvka_mst(std::size_t num_nodes,
                                              const EdgeList& edges) {
  detail::require_weights(num_nodes, edges);
  auto w = edges.weights();
  auto lighter = [&](std::uint32_t a, std::uint32_t b) {
    return w[a] < w[b] || (w[a] == w[b] && a < b);
  };

  detail::DisjointSets sets(num_nodes);
  std::vector<std::uint32_t> chosen;
  chosen.reserve(num_nodes - 1);
  std::vector<std::uint32_t> cheapest(num_nodes, kNoNode);
  std::size_t components = num_nodes;

  while (components > 1) {
    std::fill(cheapest.begin(), cheapest.end(), kNoNode);
    for (std::uint32_t k = 0; k < edges.size(); ++k) {
      const std::uint32_t a = sets.find(edges[k].u);
      const std::uint32_t b = sets.find(edges[k].v);
      if (a == b) continue;
      if (cheapest[a] == kNoNode || lighter(k, cheapest[a])) cheapest[a] = k;
      if (cheapest[b] == kNoNode || lighter(k, cheapest[b])) cheapest[b] = k;
    }
    bool merged = false;
    for (std::uint32_t node = 0; node < num_nodes; ++node) {
      const std::uint32_t k = cheapest[node];
      if (k == kNoNode) continue;
      // Two components may pick the same edge; unite() admits it once.
      if (sets.unite(edges[k].u, edges[k].v)) {
        chosen.push_back(k);
        --components;
        merged = true;
      }
    }
    if (!merged) {
      throw StructuralError("graph is disconnected: " +
                            std::to_string(components) + " components remain");
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// Kruskal over a stable (weight, index) sort. Kept independent of
// boruvka_mst so it can serve as its oracle.
inline std::vector<std::uint32_t> kruskal_mst_edges(std::size_t num_nodes,
                                                    const EdgeList& edges) {
  detail::require_weights(num_nodes, edges);
  std::vector<std::uint32_t> idx(edges.size());
  std::iota(idx.begin(), idx.end(), 0u);
  auto w = edges.weights();
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return w[a] < w[b]; });
  detail::DisjointSets sets(num_nodes);
  std::vector<std::uint32_t> chosen;
  for (std::uint32_t k : idx) {
    if (sets.unite(edges[k].u, edges[k].v)) chosen.push_back(k);
  }
  if (chosen.size() + 1 != num_nodes) {
    throw StructuralError("graph is disconnected");
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

inline double kruskal_mst_weight(std::size_t num_nodes, const EdgeList& edges) {
  double total = 0.0;
  for (std::uint32_t k : kruskal_mst_edges(num_nodes, edges)) {
    total += edges.weight(k);
  }
  return total;
}

inline double total_weight(const EdgeList& edges,
                           std::span<const std::uint32_t> chosen) {
  double total = 0.0;
  for (std::uint32_t k : chosen) total += edges.weight(k);
  return total;
}

// Spanning tree rooted for two-pass dynamic programming.
//
// `order` is breadth-first from the root, so parents precede children;
// `parent_position[k]` is the index within `order` of the parent of
// order[k]. Children of each node are listed in ascending node index.
struct RootedTree {
  std::size_t num_nodes = 0;
  std::uint32_t root = 0;
  std::vector<std::uint32_t> parent;            // kNoNode at the root
  std::vector<double> parent_edge_weight;       // 0 at the root
  std::vector<std::uint32_t> parent_edge;       // index into the EdgeList
  std::vector<std::uint32_t> order;
  std::vector<std::uint32_t> position;          // inverse of order
  std::vector<std::uint32_t> parent_position;   // kNoNode for order[0]
  std::vector<std::uint32_t> child_offsets;     // CSR, size num_nodes + 1
  std::vector<std::uint32_t> child_list;

  std::span<const std::uint32_t> children(std::uint32_t node) const {
    return std::span<const std::uint32_t>(child_list)
        .subspan(child_offsets[node],
                 child_offsets[node + 1] - child_offsets[node]);
  }
};

inline RootedTree root_tree(std::size_t num_nodes, const EdgeList& edges,
                            std::span<const std::uint32_t> chosen,
                            std::uint32_t root = 0) {
  if (num_nodes == 0 || root >= num_nodes) {
    throw ArgumentError("root " + std::to_string(root) + " out of range");
  }
  if (chosen.size() + 1 != num_nodes) {
    throw StructuralError("a spanning tree on " + std::to_string(num_nodes) +
                          " nodes needs " + std::to_string(num_nodes - 1) +
                          " edges, got " + std::to_string(chosen.size()));
  }
  // Undirected adjacency in CSR form; neighbors sorted by node index.
  std::vector<std::uint32_t> degree(num_nodes + 1, 0);
  for (std::uint32_t k : chosen) {
    if (k >= edges.size()) throw ArgumentError("edge index out of range");
    ++degree[edges[k].u + 1];
    ++degree[edges[k].v + 1];
  }
  std::partial_sum(degree.begin(), degree.end(), degree.begin());
  std::vector<std::uint32_t> fill(degree.begin(), degree.end() - 1);
  std::vector<std::uint32_t> adj(2 * chosen.size());
  std::vector<std::uint32_t> adj_edge(2 * chosen.size());
  for (std::uint32_t k : chosen) {
    adj[fill[edges[k].u]] = edges[k].v;
    adj_edge[fill[edges[k].u]++] = k;
    adj[fill[edges[k].v]] = edges[k].u;
    adj_edge[fill[edges[k].v]++] = k;
  }

  RootedTree tree;
  tree.num_nodes = num_nodes;
  tree.root = root;
  tree.parent.assign(num_nodes, kNoNode);
  tree.parent_edge_weight.assign(num_nodes, 0.0);
  tree.parent_edge.assign(num_nodes, kNoNode);
  tree.order.reserve(num_nodes);
  tree.position.assign(num_nodes, kNoNode);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> scratch;
  tree.order.push_back(root);
  tree.position[root] = 0;
  for (std::size_t head = 0; head < tree.order.size(); ++head) {
    const std::uint32_t node = tree.order[head];
    scratch.clear();
    for (std::uint32_t a = degree[node]; a < degree[node + 1]; ++a) {
      if (adj_edge[a] == tree.parent_edge[node]) continue;
      scratch.emplace_back(adj[a], adj_edge[a]);
    }
    std::sort(scratch.begin(), scratch.end());
    for (auto [next, k] : scratch) {
      if (tree.position[next] != kNoNode) {
        throw StructuralError("chosen edges contain a cycle through node " +
                              std::to_string(next));
      }
      tree.parent[next] = node;
      tree.parent_edge[next] = k;
      tree.parent_edge_weight[next] = edges.has_weights() && edges.size() > 0
                                          ? edges.weight(k)
                                          : 0.0;
      tree.position[next] = static_cast<std::uint32_t>(tree.order.size());
      tree.order.push_back(next);
    }
  }
  if (tree.order.size() != num_nodes) {
    throw StructuralError("chosen edges do not span the graph");
  }

  tree.parent_position.assign(num_nodes, kNoNode);
  tree.child_offsets.assign(num_nodes + 1, 0);
  for (std::size_t k = 1; k < num_nodes; ++k) {
    const std::uint32_t p = tree.parent[tree.order[k]];
    tree.parent_position[k] = tree.position[p];
    ++tree.child_offsets[p + 1];
  }
  std::partial_sum(tree.child_offsets.begin(), tree.child_offsets.end(),
                   tree.child_offsets.begin());
  tree.child_list.resize(num_nodes - 1);
  std::vector<std::uint32_t> cursor(tree.child_offsets.begin(),
                                    tree.child_offsets.end() - 1);
  // BFS visits children of a node in ascending index, so appending in order
  // keeps each child range sorted.
  for (std::size_t k = 1; k < num_nodes; ++k) {
    const std::uint32_t node = tree.order[k];
    tree.child_list[cursor[tree.parent[node]]++] = node;
  }
  return tree;
}

// Edge list, weights, Boruvka MST and rooting in one call.
template <typename T>
RootedTree minimum_spanning_tree(const DenseTensor<T>& guide,
                                 std::uint32_t root = 0) {
  EdgeList edges = weighted_grid(guide);
  auto chosen = boruvka_mst(edges.num_nodes(), edges);
  return root_tree(edges.num_nodes(), edges, chosen, root);
}

}  // namespace tel

#endif  // TEL_MST_HPP_
