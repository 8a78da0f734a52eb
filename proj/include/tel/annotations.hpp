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

// Sparse annotation synthesis from dense label maps: block (boundary
// peeling), point and scribble.

#ifndef TEL_ANNOTATIONS_HPP_
#define TEL_ANNOTATIONS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tel/tensor.hpp"

namespace tel {

enum class SparsityKind { kBlock, kPoint, kScribble };

struct SparsityConfig {
  SparsityKind kind = SparsityKind::kBlock;
  double ratio = 0.1;
  int points_per_region = 1;
  int walk_length = 16;
  std::uint64_t seed = 0;
};

namespace detail {

template <typename Fn>
void for_each_neighbor(std::size_t pixel, std::size_t height, std::size_t width,
                       Fn&& fn) {
  const std::size_t y = pixel / width, x = pixel % width;
  if (y > 0) fn(pixel - width);
  if (x > 0) fn(pixel - 1);
  if (x + 1 < width) fn(pixel + 1);
  if (y + 1 < height) fn(pixel + width);
}

}  // namespace detail

// City-block distance from each labeled pixel to the nearest pixel that is
// outside the image or carries a different value (including the ignore
// label). Pixels touching such a location get 1; ignore pixels get 0.
inline std::vector<std::uint32_t> boundary_distance(const LabelMap& labels) {
  const std::size_t h = labels.height(), w = labels.width();
  std::vector<std::uint32_t> dist(labels.pixels(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < labels.pixels(); ++i) {
    if (!labels.is_labeled(i)) continue;
    const std::size_t y = i / w, x = i % w;
    bool edge = y == 0 || x == 0 || y + 1 == h || x + 1 == w;
    detail::for_each_neighbor(i, h, w, [&](std::size_t j) {
      if (labels.at(j) != labels.at(i)) edge = true;
    });
    if (edge) {
      dist[i] = 1;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    detail::for_each_neighbor(i, h, w, [&](std::size_t j) {
      if (dist[j] == 0 && labels.is_labeled(j)) {
        dist[j] = dist[i] + 1;
        queue.push_back(j);
      }
    });
  }
  return dist;
}

// Keeps round(ratio * |labeled|) labeled pixels, discarding pixels in
// ascending order of boundary distance (ties by ascending pixel index).
// Ignore pixels stay ignored and do not count toward the budget. Because the
// discard order is fixed, lower ratios keep subsets of higher ratios.
inline LabelMap synth_block_annotation(const LabelMap& full, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw ArgumentError("block ratio must lie in (0, 1], got " +
                        std::to_string(ratio));
  }
  const auto dist = boundary_distance(full);
  std::vector<std::uint32_t> labeled;
  for (std::size_t i = 0; i < full.pixels(); ++i) {
    if (full.is_labeled(i)) labeled.push_back(static_cast<std::uint32_t>(i));
  }
  std::stable_sort(labeled.begin(), labeled.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return dist[a] < dist[b];
                   });
  const auto keep = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(labeled.size())));
  LabelMap out = full;
  for (std::size_t k = 0; k + keep < labeled.size(); ++k) {
    out.set(labeled[k], kIgnoreLabel);
  }
  return out;
}

// 4-connected components of equal labels, ignore pixels excluded. Components
// are ordered by their smallest pixel index; pixels within a component are
// sorted ascending.
inline std::vector<std::vector<std::uint32_t>> connected_components(
    const LabelMap& labels) {
  const std::size_t h = labels.height(), w = labels.width();
  std::vector<char> seen(labels.pixels(), 0);
  std::vector<std::vector<std::uint32_t>> components;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < labels.pixels(); ++s) {
    if (seen[s] || !labels.is_labeled(s)) continue;
    std::vector<std::uint32_t> comp;
    seen[s] = 1;
    stack.assign(1, s);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      comp.push_back(static_cast<std::uint32_t>(i));
      detail::for_each_neighbor(i, h, w, [&](std::size_t j) {
        if (!seen[j] && labels.at(j) == labels.at(s)) {
          seen[j] = 1;
          stack.push_back(j);
        }
      });
    }
    std::sort(comp.begin(), comp.end());
    components.push_back(std::move(comp));
  }
  return components;
}

// min(points_per_region, |component|) pixels per component, sampled
// uniformly without replacement.
inline LabelMap sample_point_annotation(const LabelMap& full,
                                        int points_per_region,
                                        std::uint64_t seed) {
  if (points_per_region < 1) {
    throw ArgumentError("points_per_region must be positive");
  }
  std::mt19937_64 rng(seed);
  LabelMap out(full.height(), full.width(), full.num_classes());
  for (auto& comp : connected_components(full)) {
    const std::size_t take =
        std::min<std::size_t>(comp.size(), static_cast<std::size_t>(points_per_region));
    // Partial Fisher-Yates: the first `take` entries become the sample.
    for (std::size_t k = 0; k < take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, comp.size() - 1);
      std::swap(comp[k], comp[pick(rng)]);
      out.set(comp[k], full.at(comp[k]));
    }
  }
  return out;
}

// Per component, a self-avoiding random walk covering up to walk_length
// pixels, started at a uniformly drawn interior pixel (all four neighbors in
// the component; any pixel if the component has no interior).
inline LabelMap sample_scribble_annotation(const LabelMap& full,
                                           int walk_length,
                                           std::uint64_t seed) {
  if (walk_length < 1) throw ArgumentError("walk_length must be positive");
  const std::size_t h = full.height(), w = full.width();
  std::mt19937_64 rng(seed);
  LabelMap out(h, w, full.num_classes());
  std::vector<std::size_t> candidates;
  for (const auto& comp : connected_components(full)) {
    const std::uint8_t cls = full.at(comp.front());
    std::vector<std::uint32_t> interior;
    for (std::uint32_t i : comp) {
      int inside = 0;
      detail::for_each_neighbor(i, h, w, [&](std::size_t j) {
        inside += full.at(j) == cls;
      });
      if (inside == 4) interior.push_back(i);
    }
    const auto& pool = interior.empty() ? comp : interior;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::size_t cur = pool[pick(rng)];
    out.set(cur, cls);
    for (int step = 1; step < walk_length; ++step) {
      candidates.clear();
      detail::for_each_neighbor(cur, h, w, [&](std::size_t j) {
        if (full.at(j) == cls && !out.is_labeled(j)) candidates.push_back(j);
      });
      if (candidates.empty()) break;
      std::uniform_int_distribution<std::size_t> next(0, candidates.size() - 1);
      cur = candidates[next(rng)];
      out.set(cur, cls);
    }
  }
  return out;
}

inline LabelMap synthesize(const LabelMap& full, const SparsityConfig& config) {
  switch (config.kind) {
    case SparsityKind::kBlock:
      return synth_block_annotation(full, config.ratio);
    case SparsityKind::kPoint:
      return sample_point_annotation(full, config.points_per_region, config.seed);
    case SparsityKind::kScribble:
      return sample_scribble_annotation(full, config.walk_length, config.seed);
  }
  throw ArgumentError("unknown sparsity kind");
}

}  // namespace tel

#endif  // TEL_ANNOTATIONS_HPP_
