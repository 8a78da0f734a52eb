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

// Segmentation loss on labeled pixels, soft pseudo labels from cascaded tree
// filtering, the tree energy loss on unlabeled pixels, and their weighted
// sum L = L_seg + lambda * L_tree with exact gradients.

#ifndef TEL_LOSSES_HPP_
#define TEL_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tel/tensor.hpp"
#include "tel/tree_filter.hpp"

namespace tel {

// Per-pixel distance between the prediction and the pseudo label, reduced
// over classes.
enum class Delta {
  kL1,            //  sum_c |P - Y|
  kL2,            //  sum_c (P - Y)^2
  kCrossEntropy,  // -sum_c Y log P
  kDotProduct,    // -sum_c P Y
};

// Order of the low-level (color) and high-level (feature) filters.
enum class Aggregation {
  kLowHighCascade,   // LH_C: F(F(P, A_low), A_high)
  kHighLowCascade,   // HL_C: F(F(P, A_high), A_low)
  kLowHighParallel,  // LH_P: F(P, A_low) and F(P, A_high), losses averaged
};

inline std::string_view to_string(Delta d) {
  switch (d) {
    case Delta::kL1: return "L1";
    case Delta::kL2: return "L2";
    case Delta::kCrossEntropy: return "cross_entropy";
    case Delta::kDotProduct: return "dot_product";
  }
  return "?";
}

inline std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::kLowHighCascade: return "LH_C";
    case Aggregation::kHighLowCascade: return "HL_C";
    case Aggregation::kLowHighParallel: return "LH_P";
  }
  return "?";
}

inline Delta parse_delta(std::string_view s) {
  for (Delta d : {Delta::kL1, Delta::kL2, Delta::kCrossEntropy,
                  Delta::kDotProduct}) {
    if (s == to_string(d)) return d;
  }
  throw ArgumentError("unknown assignment function '" + std::string(s) +
                      "' (L1, L2, cross_entropy, dot_product)");
}

inline Aggregation parse_aggregation(std::string_view s) {
  for (Aggregation a : {Aggregation::kLowHighCascade,
                        Aggregation::kHighLowCascade,
                        Aggregation::kLowHighParallel}) {
    if (s == to_string(a)) return a;
  }
  throw ArgumentError("unknown aggregation '" + std::string(s) +
                      "' (LH_C, HL_C, LH_P)");
}

struct LossConfig {
  double lambda = 0.4;
  double sigma_low = 0.02;
  Delta delta = Delta::kL1;
  Aggregation aggregation = Aggregation::kLowHighCascade;
  bool detach_pseudo_label = false;
  // When set, replaces the soft assignment with hard cross-entropy on
  // unlabeled pixels whose pseudo-label confidence exceeds the threshold.
  std::optional<double> naive_threshold;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw ArgumentError("lambda must be finite and non-negative");
    }
    if (!(sigma_low > 0.0) || !std::isfinite(sigma_low)) {
      throw ArgumentError("sigma must be positive and finite");
    }
    if (naive_threshold &&
        !(*naive_threshold > 0.5 && *naive_threshold <= 1.0)) {
      throw ArgumentError("naive threshold must lie in (0.5, 1]");
    }
  }
};

inline constexpr double kProbabilityFloor = 1e-12;

// `empty` reports that the averaging set was empty; value is then 0.
struct LossTerm {
  double value = 0.0;
  bool empty = false;
};

namespace detail {

inline void check_prediction(const DenseTensor<double>& p,
                             const LabelMap& labels) {
  if (p.empty() || p.height() != labels.height() ||
      p.width() != labels.width()) {
    throw ArgumentError("prediction and label map sizes differ");
  }
  if (static_cast<std::size_t>(labels.num_classes()) > p.channels()) {
    throw ArgumentError("label map has more classes than prediction channels");
  }
}

}  // namespace detail

// -(1/|L|) sum_{i in L} log P_i[Y_i], with P clamped below at 1e-12.
// If `grad` is given it receives dL/dP.
inline LossTerm partial_cross_entropy(const DenseTensor<double>& p,
                                      const LabelMap& labels,
                                      DenseTensor<double>* grad = nullptr) {
  detail::check_prediction(p, labels);
  if (grad) *grad = DenseTensor<double>(p.channels(), p.height(), p.width());
  const std::size_t count = labels.labeled_count();
  if (count == 0) return {0.0, true};
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.pixels(); ++i) {
    if (!labels.is_labeled(i)) continue;
    const double prob = p.at(labels.at(i), i);
    sum -= std::log(std::max(prob, kProbabilityFloor));
    if (grad && prob > kProbabilityFloor) {
      grad->at(labels.at(i), i) = -inv / prob;
    }
  }
  return {sum * inv, false};
}

// (1/|U|) sum_{i in U} delta(P_i, Y_i). Labeled pixels contribute nothing.
inline LossTerm tree_energy_loss(const DenseTensor<double>& p,
                                 const DenseTensor<double>& pseudo,
                                 const LabelMap& labels, Delta delta,
                                 DenseTensor<double>* grad_prediction = nullptr,
                                 DenseTensor<double>* grad_pseudo = nullptr) {
  detail::check_prediction(p, labels);
  if (!pseudo.same_shape(p)) {
    throw ArgumentError("pseudo label shape differs from prediction");
  }
  if (grad_prediction) {
    *grad_prediction = DenseTensor<double>(p.channels(), p.height(), p.width());
  }
  if (grad_pseudo) {
    *grad_pseudo = DenseTensor<double>(p.channels(), p.height(), p.width());
  }
  const std::size_t count = labels.unlabeled_count();
  if (count == 0) return {0.0, true};
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (std::size_t c = 0; c < p.channels(); ++c) {
    for (std::size_t i = 0; i < labels.pixels(); ++i) {
      if (labels.is_labeled(i)) continue;
      const double a = p.at(c, i);
      const double b = pseudo.at(c, i);
      double dp = 0.0, dy = 0.0;
      switch (delta) {
        case Delta::kL1: {
          const double d = a - b;
          sum += std::abs(d);
          dp = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
          dy = -dp;
          break;
        }
        case Delta::kL2: {
          const double d = a - b;
          sum += d * d;
          dp = 2.0 * d;
          dy = -dp;
          break;
        }
        case Delta::kCrossEntropy: {
          const double clamped = std::max(a, kProbabilityFloor);
          sum -= b * std::log(clamped);
          dp = a > kProbabilityFloor ? -b / a : 0.0;
          dy = -std::log(clamped);
          break;
        }
        case Delta::kDotProduct:
          sum -= a * b;
          dp = -b;
          dy = -a;
          break;
      }
      if (grad_prediction) grad_prediction->at(c, i) = dp * inv;
      if (grad_pseudo) grad_pseudo->at(c, i) = dy * inv;
    }
  }
  return {sum * inv, false};
}

// Pseudo labels and everything needed to differentiate them.
struct PseudoLabels {
  Aggregation aggregation = Aggregation::kLowHighCascade;
  // Cascades: the final pseudo label. LH_P: the low-level branch.
  DenseTensor<double> label;
  // LH_P only: the high-level branch.
  DenseTensor<double> high_branch;
  // Cascades only: output of the first filter.
  DenseTensor<double> stage_one;
  FilterWorkspace first;
  FilterWorkspace second;

  // Single field used for hard assignment and metrics; LH_P averages the
  // two branches.
  DenseTensor<double> combined() const {
    if (aggregation != Aggregation::kLowHighParallel) return label;
    DenseTensor<double> out = label;
    auto dst = out.data();
    auto hi = high_branch.data();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      dst[k] = 0.5 * (dst[k] + hi[k]);
    }
    return out;
  }
};

inline PseudoLabels cascaded_pseudo_label(const DenseTensor<double>& p,
                                          const AffinityTree& low,
                                          const AffinityTree& high,
                                          Aggregation aggregation,
                                          int threads = 1) {
  if (low.tree.num_nodes != p.pixels() || high.tree.num_nodes != p.pixels()) {
    throw ArgumentError("affinity trees do not match the prediction grid");
  }
  PseudoLabels out;
  out.aggregation = aggregation;
  switch (aggregation) {
    case Aggregation::kLowHighCascade:
    case Aggregation::kHighLowCascade: {
      const bool low_first = aggregation == Aggregation::kLowHighCascade;
      const AffinityTree& a = low_first ? low : high;
      const AffinityTree& b = low_first ? high : low;
      auto s1 = tree_filter_forward(p, a.tree, a.transmittance, threads);
      auto s2 = tree_filter_forward(s1.output, b.tree, b.transmittance, threads);
      out.stage_one = std::move(s1.output);
      out.first = std::move(s1.workspace);
      out.label = std::move(s2.output);
      out.second = std::move(s2.workspace);
      break;
    }
    case Aggregation::kLowHighParallel: {
      auto l = tree_filter_forward(p, low.tree, low.transmittance, threads);
      auto h = tree_filter_forward(p, high.tree, high.transmittance, threads);
      out.label = std::move(l.output);
      out.first = std::move(l.workspace);
      out.high_branch = std::move(h.output);
      out.second = std::move(h.workspace);
      break;
    }
  }
  return out;
}

struct PseudoLabelGradients {
  DenseTensor<double> grad_prediction;
  std::vector<double> grad_high_transmittance;
};

// Backpropagates dL/d(label) (and, for LH_P, dL/d(high_branch)) to the
// prediction and to the high-level transmittances. Low-level transmittances
// are fixed per image and get no gradient.
inline PseudoLabelGradients cascaded_pseudo_label_backward(
    const PseudoLabels& labels, const DenseTensor<double>& grad_label,
    const DenseTensor<double>* grad_high_branch, const DenseTensor<double>& p,
    const AffinityTree& low, const AffinityTree& high, int threads = 1) {
  PseudoLabelGradients out;
  switch (labels.aggregation) {
    case Aggregation::kLowHighCascade: {
      auto g2 = tree_filter_backward(grad_label, labels.second, high.tree,
                                     high.transmittance, labels.stage_one,
                                     threads);
      auto g1 = tree_filter_backward(g2.grad_input, labels.first, low.tree,
                                     low.transmittance, p, threads);
      out.grad_prediction = std::move(g1.grad_input);
      out.grad_high_transmittance = std::move(g2.grad_transmittance);
      break;
    }
    case Aggregation::kHighLowCascade: {
      auto g2 = tree_filter_backward(grad_label, labels.second, low.tree,
                                     low.transmittance, labels.stage_one,
                                     threads);
      auto g1 = tree_filter_backward(g2.grad_input, labels.first, high.tree,
                                     high.transmittance, p, threads);
      out.grad_prediction = std::move(g1.grad_input);
      out.grad_high_transmittance = std::move(g1.grad_transmittance);
      break;
    }
    case Aggregation::kLowHighParallel: {
      if (grad_high_branch == nullptr) {
        throw ArgumentError("LH_P backward needs the high-branch gradient");
      }
      auto gl = tree_filter_backward(grad_label, labels.first, low.tree,
                                     low.transmittance, p, threads);
      auto gh = tree_filter_backward(*grad_high_branch, labels.second,
                                     high.tree, high.transmittance, p, threads);
      out.grad_prediction = std::move(gl.grad_input);
      auto dst = out.grad_prediction.data();
      auto src = gh.grad_input.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      out.grad_high_transmittance = std::move(gh.grad_transmittance);
      break;
    }
  }
  return out;
}

struct TotalLoss {
  double value = 0.0;
  double seg = 0.0;
  double tree = 0.0;
  bool no_labeled = false;
  bool no_unlabeled = false;
  // Naive mode: number of unlabeled pixels above the threshold.
  std::size_t naive_selected = 0;
  DenseTensor<double> pseudo_label;
  DenseTensor<double> grad_prediction;
  std::vector<double> grad_high_transmittance;
};

// L = L_seg + lambda * L_tree and, when `with_gradient`, dL/dP and dL/dt for
// the high-level tree. Unless the pseudo label is detached (or the naive
// thresholded variant is active), gradients flow through both filters.
inline TotalLoss total_loss(const DenseTensor<double>& p,
                            const LabelMap& labels, const AffinityTree& low,
                            const AffinityTree& high, const LossConfig& config,
                            bool with_gradient = true, int threads = 1) {
  config.validate();
  TotalLoss out;
  DenseTensor<double> grad_seg;
  const LossTerm seg =
      partial_cross_entropy(p, labels, with_gradient ? &grad_seg : nullptr);
  out.seg = seg.value;
  out.no_labeled = seg.empty;

  PseudoLabels pl =
      cascaded_pseudo_label(p, low, high, config.aggregation, threads);
  out.pseudo_label = pl.combined();
  out.no_unlabeled = labels.unlabeled_count() == 0;
  out.grad_high_transmittance.assign(p.pixels(), 0.0);
  if (with_gradient) out.grad_prediction = grad_seg;

  const double lambda = config.lambda;
  auto add_scaled = [&](const DenseTensor<double>& g, double scale) {
    auto dst = out.grad_prediction.data();
    auto src = g.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
  };

  if (config.naive_threshold) {
    const double threshold = *config.naive_threshold;
    std::vector<std::size_t> selected;
    std::vector<std::size_t> hard;
    for (std::size_t i = 0; i < labels.pixels(); ++i) {
      if (labels.is_labeled(i)) continue;
      std::size_t best = 0;
      for (std::size_t c = 1; c < p.channels(); ++c) {
        if (out.pseudo_label.at(c, i) > out.pseudo_label.at(best, i)) best = c;
      }
      if (out.pseudo_label.at(best, i) > threshold) {
        selected.push_back(i);
        hard.push_back(best);
      }
    }
    out.naive_selected = selected.size();
    if (!selected.empty()) {
      const double inv = 1.0 / static_cast<double>(selected.size());
      double sum = 0.0;
      for (std::size_t k = 0; k < selected.size(); ++k) {
        const double prob = p.at(hard[k], selected[k]);
        sum -= std::log(std::max(prob, kProbabilityFloor));
        if (with_gradient && prob > kProbabilityFloor) {
          out.grad_prediction.at(hard[k], selected[k]) -= lambda * inv / prob;
        }
      }
      out.tree = sum * inv;
    }
    out.value = out.seg + lambda * out.tree;
    return out;
  }

  DenseTensor<double> grad_p, grad_y, grad_p2, grad_y2;
  DenseTensor<double>* gp = with_gradient ? &grad_p : nullptr;
  DenseTensor<double>* gy = with_gradient ? &grad_y : nullptr;
  if (config.aggregation == Aggregation::kLowHighParallel) {
    const LossTerm a = tree_energy_loss(p, pl.label, labels, config.delta, gp, gy);
    const LossTerm b = tree_energy_loss(p, pl.high_branch, labels, config.delta,
                                        with_gradient ? &grad_p2 : nullptr,
                                        with_gradient ? &grad_y2 : nullptr);
    out.tree = 0.5 * (a.value + b.value);
  } else {
    out.tree = tree_energy_loss(p, pl.label, labels, config.delta, gp, gy).value;
  }
  out.value = out.seg + lambda * out.tree;
  if (!with_gradient || lambda == 0.0 || out.no_unlabeled) return out;

  const bool parallel = config.aggregation == Aggregation::kLowHighParallel;
  const double branch = parallel ? 0.5 : 1.0;
  add_scaled(grad_p, lambda * branch);
  if (parallel) add_scaled(grad_p2, lambda * branch);
  if (config.detach_pseudo_label) return out;

  auto scale_in_place = [](DenseTensor<double>& g, double s) {
    for (double& v : g.data()) v *= s;
  };
  scale_in_place(grad_y, lambda * branch);
  if (parallel) scale_in_place(grad_y2, lambda * branch);
  PseudoLabelGradients back = cascaded_pseudo_label_backward(
      pl, grad_y, parallel ? &grad_y2 : nullptr, p, low, high, threads);
  add_scaled(back.grad_prediction, 1.0);
  out.grad_high_transmittance = std::move(back.grad_high_transmittance);
  return out;
}

}  // namespace tel

#endif  // TEL_LOSSES_HPP_
