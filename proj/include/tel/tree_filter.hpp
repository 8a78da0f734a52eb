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

// Normalized tree filtering in O(n) per channel.
//
// On a tree the affinity between nodes i and j is the product of the
// per-edge transmittances t along the path between them, so for any signal x
//
//   (A x)_i = sum_j A_ij x_j
//
// is computed by one leaf-to-root pass
//
//   up(i) = x_i + sum_{c in children(i)} t(c) up(c)
//
// followed by one root-to-leaf pass
//
//   full(root) = up(root)
//   full(i)    = t(i) full(parent(i)) + (1 - t(i)^2) up(i).
//
// The filter output is (A P) / (A 1). The normalizer z = A 1 runs through the
// same passes as an extra all-ones channel.

#ifndef TEL_TREE_FILTER_HPP_
#define TEL_TREE_FILTER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tel/mst.hpp"
#include "tel/parallel.hpp"
#include "tel/tensor.hpp"

namespace tel {

// Per-node transmittance of the edge to the parent, exp(-w / sigma).
// The root has no parent edge; its entry is 0 and never read.
struct Transmittances {
  std::vector<double> values;

  double operator[](std::size_t node) const { return values[node]; }
  std::size_t size() const { return values.size(); }
};

inline Transmittances transmittances(const RootedTree& tree, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ArgumentError("sigma must be positive and finite, got " +
                        std::to_string(sigma));
  }
  Transmittances t;
  t.values.assign(tree.num_nodes, 0.0);
  for (std::size_t i = 0; i < tree.num_nodes; ++i) {
    if (i == tree.root) continue;
    // Clamped so t stays strictly positive when exp() underflows.
    t.values[i] = std::max(std::exp(-tree.parent_edge_weight[i] / sigma),
                           std::numeric_limits<double>::min());
  }
  return t;
}

// A rooted MST together with its transmittances.
struct AffinityTree {
  RootedTree tree;
  Transmittances transmittance;
};

template <typename T>
AffinityTree build_affinity_tree(const DenseTensor<T>& guide, double sigma,
                                 std::uint32_t root = 0) {
  AffinityTree out{minimum_spanning_tree(guide, root), {}};
  out.transmittance = transmittances(out.tree, sigma);
  return out;
}

// State kept between tree_filter_forward() and tree_filter_backward().
//
// Rows are indexed by position in tree.order. `up` and `full` hold the
// leaf-to-root and root-to-leaf aggregates of every input channel followed
// by the all-ones channel, whose `full` row is the normalizer z.
struct FilterWorkspace {
  std::size_t channels = 0;
  std::size_t nodes = 0;
  std::uint64_t fingerprint = 0;
  std::vector<double> up;
  std::vector<double> full;

  bool empty() const { return nodes == 0; }

  std::span<const double> up_row(std::size_t r) const {
    return std::span<const double>(up).subspan(r * nodes, nodes);
  }
  std::span<const double> full_row(std::size_t r) const {
    return std::span<const double>(full).subspan(r * nodes, nodes);
  }

  // z by node index.
  std::vector<double> normalization(const RootedTree& tree) const {
    std::vector<double> z(nodes);
    auto row = full_row(channels);
    for (std::size_t k = 0; k < nodes; ++k) z[tree.order[k]] = row[k];
    return z;
  }
};

template <typename T>
struct FilterOutput {
  DenseTensor<T> output;
  FilterWorkspace workspace;
};

template <typename T>
struct FilterGradients {
  DenseTensor<T> grad_input;
  std::vector<double> grad_transmittance;  // by node; 0 at the root
};

namespace detail {

inline void fnv_mix(std::uint64_t& h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
}

template <typename T>
std::uint64_t filter_fingerprint(const DenseTensor<T>& input,
                                 const RootedTree& tree,
                                 const Transmittances& t) {
  std::uint64_t h = 1469598103934665603ull;
  const std::uint64_t dims[4] = {input.channels(), input.height(),
                                 input.width(), sizeof(T)};
  fnv_mix(h, dims, sizeof(dims));
  fnv_mix(h, tree.parent.data(), tree.parent.size() * sizeof(std::uint32_t));
  fnv_mix(h, t.values.data(), t.values.size() * sizeof(double));
  fnv_mix(h, input.data().data(), input.size() * sizeof(T));
  return h;
}

template <typename T>
void check_filter_inputs(const DenseTensor<T>& input, const RootedTree& tree,
                         const Transmittances& t) {
  if (input.empty() || input.pixels() != tree.num_nodes) {
    throw ArgumentError("tensor has " + std::to_string(input.pixels()) +
                        " pixels but the tree has " +
                        std::to_string(tree.num_nodes) + " nodes");
  }
  if (t.size() != tree.num_nodes) {
    throw ArgumentError("transmittance count does not match the tree");
  }
}

// Transmittances and (1 - t^2) rearranged by traversal position.
struct PositionedTransmittance {
  std::vector<double> t;
  std::vector<double> one_minus_t2;
};

inline PositionedTransmittance by_position(const RootedTree& tree,
                                           const Transmittances& t) {
  PositionedTransmittance out;
  out.t.assign(tree.num_nodes, 0.0);
  out.one_minus_t2.assign(tree.num_nodes, 1.0);
  for (std::size_t k = 1; k < tree.num_nodes; ++k) {
    const double tk = t.values[tree.order[k]];
    if (!std::isfinite(tk) || tk < 0.0) {
      throw ArgumentError("transmittances must be finite and non-negative");
    }
    out.t[k] = tk;
    out.one_minus_t2[k] = (1.0 - tk) * (1.0 + tk);
  }
  return out;
}

inline void upward_pass(std::span<double> row, const RootedTree& tree,
                        std::span<const double> t) {
  const std::uint32_t* pp = tree.parent_position.data();
  for (std::size_t k = row.size(); k-- > 1;) row[pp[k]] += t[k] * row[k];
}

inline void downward_pass(std::span<const double> up, std::span<double> full,
                          const RootedTree& tree, std::span<const double> t,
                          std::span<const double> one_minus_t2) {
  const std::uint32_t* pp = tree.parent_position.data();
  full[0] = up[0];
  for (std::size_t k = 1; k < up.size(); ++k) {
    full[k] = t[k] * full[pp[k]] + one_minus_t2[k] * up[k];
  }
}

}  // namespace detail

// Unnormalized aggregation A x for a signal given by node index.
inline std::vector<double> tree_aggregate(std::span<const double> values,
                                          const RootedTree& tree,
                                          const Transmittances& t) {
  if (values.size() != tree.num_nodes || t.size() != tree.num_nodes) {
    throw ArgumentError("signal length does not match the tree");
  }
  auto pt = detail::by_position(tree, t);
  const std::size_t n = tree.num_nodes;
  std::vector<double> up(n), full(n), out(n);
  for (std::size_t k = 0; k < n; ++k) up[k] = values[tree.order[k]];
  detail::upward_pass(up, tree, pt.t);
  detail::downward_pass(up, full, tree, pt.t, pt.one_minus_t2);
  for (std::size_t k = 0; k < n; ++k) out[tree.order[k]] = full[k];
  return out;
}

// out_i = sum_j A_ij P_j / sum_j A_ij for every channel, in O(n C).
// All accumulation is in double regardless of T.
template <typename T>
FilterOutput<T> tree_filter_forward(const DenseTensor<T>& input,
                                    const RootedTree& tree,
                                    const Transmittances& t, int threads = 1) {
  detail::check_filter_inputs(input, tree, t);
  const std::size_t n = tree.num_nodes;
  const std::size_t channels = input.channels();
  auto pt = detail::by_position(tree, t);

  FilterOutput<T> result{
      DenseTensor<T>(channels, input.height(), input.width()), {}};
  FilterWorkspace& ws = result.workspace;
  ws.channels = channels;
  ws.nodes = n;
  ws.fingerprint = detail::filter_fingerprint(input, tree, t);
  ws.up.assign((channels + 1) * n, 0.0);
  ws.full.assign((channels + 1) * n, 0.0);

  parallel_for(channels + 1, threads, [&](std::size_t r) {
    std::span<double> up(ws.up.data() + r * n, n);
    std::span<double> full(ws.full.data() + r * n, n);
    if (r < channels) {
      auto src = input.channel(r);
      for (std::size_t k = 0; k < n; ++k) up[k] = src[tree.order[k]];
    } else {
      std::fill(up.begin(), up.end(), 1.0);
    }
    detail::upward_pass(up, tree, pt.t);
    detail::downward_pass(up, full, tree, pt.t, pt.one_minus_t2);
  });

  const double* z = ws.full.data() + channels * n;
  parallel_for(channels, threads, [&](std::size_t c) {
    const double* full = ws.full.data() + c * n;
    auto dst = result.output.channel(c);
    for (std::size_t k = 0; k < n; ++k) {
      dst[tree.order[k]] = static_cast<T>(full[k] / z[k]);
    }
  });
  return result;
}

// Reverse-mode pass for tree_filter_forward.
//
// With S = A P and z = A 1, the output is S / z. Let g be the incoming
// gradient. Then dL/dS = g / z and dL/dz_i = -sum_c g_ic out_ic / z_i, and
// since A is symmetric grad_P = A (g / z), a single aggregation.
//
// For the edge from node c to its parent p, every path that crosses it joins
// subtree(c) to the rest of the tree, and d A_ij / d t_c = A_ic A_pj for
// i in subtree(c), j outside. Summing over such pairs for a signal x and
// adjoint y gives
//
//   dL/dt_c = up_y(c) (full_x(p) - t_c up_x(c))
//           + up_x(c) (full_y(p) - t_c up_y(c)),
//
// evaluated for every channel (x = P_c, y = g_c / z) and for the normalizer
// (x = 1, y = dL/dz), then summed.
template <typename T>
FilterGradients<T> tree_filter_backward(const DenseTensor<T>& grad_output,
                                        const FilterWorkspace& workspace,
                                        const RootedTree& tree,
                                        const Transmittances& t,
                                        const DenseTensor<T>& input,
                                        int threads = 1) {
  detail::check_filter_inputs(input, tree, t);
  if (workspace.empty() || workspace.nodes != tree.num_nodes ||
      workspace.channels != input.channels() ||
      workspace.fingerprint != detail::filter_fingerprint(input, tree, t)) {
    throw ContractError(
        "filter workspace does not belong to this (input, tree, "
        "transmittance) triple; run tree_filter_forward first");
  }
  if (!grad_output.same_shape(input)) {
    throw ArgumentError("gradient shape does not match the filter input");
  }
  const std::size_t n = tree.num_nodes;
  const std::size_t channels = input.channels();
  const std::size_t rows = channels + 1;
  auto pt = detail::by_position(tree, t);
  const double* z = workspace.full.data() + channels * n;

  std::vector<double> y_up(rows * n, 0.0);
  std::vector<double> y_full(rows * n, 0.0);

  // Adjoint of S, and of z accumulated over channels in a fixed order.
  parallel_for(channels, threads, [&](std::size_t c) {
    auto g = grad_output.channel(c);
    double* y = y_up.data() + c * n;
    for (std::size_t k = 0; k < n; ++k) {
      y[k] = static_cast<double>(g[tree.order[k]]) / z[k];
    }
  });
  {
    double* yz = y_up.data() + channels * n;
    for (std::size_t c = 0; c < channels; ++c) {
      auto g = grad_output.channel(c);
      const double* s = workspace.full.data() + c * n;
      for (std::size_t k = 0; k < n; ++k) {
        yz[k] -= static_cast<double>(g[tree.order[k]]) * s[k] / (z[k] * z[k]);
      }
    }
  }

  parallel_for(rows, threads, [&](std::size_t r) {
    std::span<double> up(y_up.data() + r * n, n);
    std::span<double> full(y_full.data() + r * n, n);
    detail::upward_pass(up, tree, pt.t);
    detail::downward_pass(up, full, tree, pt.t, pt.one_minus_t2);
  });

  FilterGradients<T> grads{
      DenseTensor<T>(channels, input.height(), input.width()),
      std::vector<double>(n, 0.0)};
  parallel_for(channels, threads, [&](std::size_t c) {
    const double* full = y_full.data() + c * n;
    auto dst = grads.grad_input.channel(c);
    for (std::size_t k = 0; k < n; ++k) {
      dst[tree.order[k]] = static_cast<T>(full[k]);
    }
  });

  const std::size_t blocks = std::max<std::size_t>(1, std::min<std::size_t>(n, 64));
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t begin = std::max<std::size_t>(1, n * b / blocks);
    const std::size_t end = n * (b + 1) / blocks;
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t p = tree.parent_position[k];
      const double tk = pt.t[k];
      double acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double xu = workspace.up[r * n + k];
        const double xf = workspace.full[r * n + p];
        const double yu = y_up[r * n + k];
        const double yf = y_full[r * n + p];
        acc += yu * (xf - tk * xu) + xu * (yf - tk * yu);
      }
      grads.grad_transmittance[tree.order[k]] = acc;
    }
  });
  return grads;
}

// Forward pass only.
template <typename T>
DenseTensor<T> tree_filter(const DenseTensor<T>& input,
                           const AffinityTree& affinity, int threads = 1) {
  return tree_filter_forward(input, affinity.tree, affinity.transmittance,
                             threads)
      .output;
}

}  // namespace tel

#endif  // TEL_TREE_FILTER_HPP_
