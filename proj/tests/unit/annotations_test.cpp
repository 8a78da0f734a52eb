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

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "tel/annotations.hpp"

namespace tel {
namespace {

LabelMap halves(std::size_t h, std::size_t w) {
  std::vector<std::uint8_t> v(h * w);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (i % w) < w / 2 ? 0 : 1;
  return LabelMap(h, w, 2, v);
}

LabelMap random_regions(std::uint64_t seed, std::size_t h, std::size_t w) {
  // Blobs from a few random rectangles painted over each other.
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> v(h * w, 0);
  std::uniform_int_distribution<std::size_t> ry(0, h - 1), rx(0, w - 1);
  std::uniform_int_distribution<int> cls(0, 3);
  for (int r = 0; r < 6; ++r) {
    std::size_t y0 = ry(rng), y1 = ry(rng), x0 = rx(rng), x1 = rx(rng);
    if (y0 > y1) std::swap(y0, y1);
    if (x0 > x1) std::swap(x0, x1);
    const int c = cls(rng);
    for (std::size_t y = y0; y <= y1; ++y)
      for (std::size_t x = x0; x <= x1; ++x)
        v[y * w + x] = c == 3 ? kIgnoreLabel : static_cast<std::uint8_t>(c);
  }
  return LabelMap(h, w, 3, v);
}

TEST(BoundaryDistance, MatchesExhaustiveSearch) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    LabelMap m = random_regions(seed, 13, 17);
    auto fast = boundary_distance(m);
    auto ref = oracle::brute_boundary_distance(m);
    for (std::size_t i = 0; i < m.pixels(); ++i) {
      EXPECT_EQ(static_cast<long>(fast[i]), ref[i]) << "seed " << seed << " pixel " << i;
    }
  }
}

TEST(BlockAnnotation, FullRatioIsIdentity) {
  LabelMap m = random_regions(1, 10, 10);
  EXPECT_EQ(synth_block_annotation(m, 1.0), m);
}

TEST(BlockAnnotation, FourByFourHalvesKeepsInnerColumns) {
  LabelMap out = synth_block_annotation(halves(4, 4), 0.5);
  EXPECT_EQ(out.labeled_count(), 8u);
  auto d = oracle::brute_boundary_distance(halves(4, 4));
  for (std::size_t i = 0; i < 16; ++i) {
    if (!out.is_labeled(i)) continue;
    for (std::size_t j = 0; j < 16; ++j) {
      if (!out.is_labeled(j) && (j % 4 < 2) == (i % 4 < 2)) EXPECT_GE(d[i], d[j]);
    }
  }
}

TEST(BlockAnnotation, SingleClassKeepsInteriorBand) {
  LabelMap m(100, 100, 1, 0);
  LabelMap out = synth_block_annotation(m, 0.1);
  EXPECT_EQ(out.labeled_count(), 1000u);
  auto d = oracle::brute_boundary_distance(m);
  long kept_min = 1000, dropped_max = 0;
  for (std::size_t i = 0; i < m.pixels(); ++i) {
    if (out.is_labeled(i)) kept_min = std::min(kept_min, d[i]);
    else dropped_max = std::max(dropped_max, d[i]);
  }
  EXPECT_GE(kept_min, dropped_max);
}

TEST(BlockAnnotation, RatiosAreAccurateNestedAndMaximal) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    LabelMap m = random_regions(seed, 31, 29);
    const double total = static_cast<double>(m.labeled_count());
    auto d = oracle::brute_boundary_distance(m);
    LabelMap prev = m;
    for (double ratio : {0.5, 0.2, 0.1}) {
      LabelMap out = synth_block_annotation(m, ratio);
      EXPECT_NEAR(out.labeled_count() / total, ratio, 0.01);
      long kept_min = 1 << 20, dropped_max = 0;
      for (std::size_t i = 0; i < m.pixels(); ++i) {
        if (out.is_labeled(i)) {
          EXPECT_EQ(out.at(i), m.at(i));
          EXPECT_TRUE(prev.is_labeled(i)) << "not nested at ratio " << ratio;
          kept_min = std::min(kept_min, d[i]);
        } else if (m.is_labeled(i)) {
          dropped_max = std::max(dropped_max, d[i]);
        }
      }
      EXPECT_GE(kept_min, dropped_max);
      prev = out;
    }
  }
}

TEST(BlockAnnotation, BadRatioIsArgumentError) {
  EXPECT_THROW(synth_block_annotation(halves(2, 2), 0.0), ArgumentError);
  EXPECT_THROW(synth_block_annotation(halves(2, 2), 1.5), ArgumentError);
}

TEST(PointAnnotation, OnePointPerComponent) {
  LabelMap m = halves(6, 6);
  LabelMap out = sample_point_annotation(m, 1, 42);
  EXPECT_EQ(out.labeled_count(), 2u);
  int left = 0, right = 0;
  for (std::size_t i = 0; i < 36; ++i) {
    if (!out.is_labeled(i)) continue;
    EXPECT_EQ(out.at(i), m.at(i));
    (i % 6 < 3 ? left : right)++;
  }
  EXPECT_EQ(left, 1);
  EXPECT_EQ(right, 1);
  EXPECT_EQ(sample_point_annotation(m, 1, 42), out);
}

TEST(PointAnnotation, EnoughPointsRecoverTheMap) {
  LabelMap m(5, 5, 3, 2);
  EXPECT_EQ(sample_point_annotation(m, 25, 0), m);
}

TEST(ScribbleAnnotation, WalksStayInComponent) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    LabelMap m = random_regions(seed, 20, 20);
    const auto comps = connected_components(m);
    LabelMap out = sample_scribble_annotation(m, 9, seed);
    EXPECT_EQ(sample_scribble_annotation(m, 9, seed), out);
    for (const auto& comp : comps) {
      int count = 0;
      for (std::uint32_t i : comp) {
        if (!out.is_labeled(i)) continue;
        EXPECT_EQ(out.at(i), m.at(i));
        ++count;
      }
      EXPECT_GE(count, 1);
      EXPECT_LE(count, 9);
    }
    EXPECT_EQ(out.labeled_count() > 0, !comps.empty());
  }
}

TEST(ScribbleAnnotation, UnitWalkIsOnePointPerComponent) {
  LabelMap m = random_regions(3, 15, 15);
  LabelMap out = sample_scribble_annotation(m, 1, 7);
  EXPECT_EQ(out.labeled_count(), connected_components(m).size());
}

TEST(ConnectedComponents, CountsFourConnectedRegions) {
  // Diagonal neighbors are not connected.
  LabelMap m(2, 2, 2, std::vector<std::uint8_t>{0, 1, 1, 0});
  EXPECT_EQ(connected_components(m).size(), 4u);
  EXPECT_EQ(connected_components(halves(3, 4)).size(), 2u);
}

}  // namespace
}  // namespace tel
