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

// Desk-scale online self-training: a per-pixel MLP stands in for the
// segmentation network, the tree energy loss supervises unlabeled pixels,
// and gradients are derived by hand for the fixed architecture.
//
//   d_i = (r, g, b, x / W, y / H)
//   h_i = tanh(W1 d_i + b1)
//   P_i = softmax(W2 h_i + b2)        predictions
//   F_i = W3 h_i                      features for the high-level tree

#ifndef TEL_TOY_TRAIN_HPP_
#define TEL_TOY_TRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tel/annotations.hpp"
#include "tel/losses.hpp"
#include "tel/tensor.hpp"
#include "tel/tree_filter.hpp"

namespace tel {

inline constexpr std::size_t kDescriptorSize = 5;

struct ModelShape {
  std::size_t num_classes = 2;
  std::size_t hidden = 16;
  std::size_t feat_dim = 8;

  std::size_t parameter_count() const {
    return hidden * kDescriptorSize + hidden + num_classes * hidden +
           num_classes + feat_dim * hidden;
  }
};

// All parameters live in one flat vector (W1, b1, W2, b2, W3, each
// row-major) so optimizers and finite-difference checks can treat them
// uniformly.
class ToyModel {
 public:
  explicit ToyModel(ModelShape shape)
      : shape_(shape), params_(shape.parameter_count(), 0.0) {
    if (shape.num_classes < 1 || shape.hidden < 1 || shape.feat_dim < 1) {
      throw ArgumentError("model dimensions must be positive");
    }
  }

  const ModelShape& shape() const { return shape_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::span<const double> w1() const { return block(0, shape_.hidden * kDescriptorSize); }
  std::span<const double> b1() const { return block(off_b1(), shape_.hidden); }
  std::span<const double> w2() const { return block(off_w2(), shape_.num_classes * shape_.hidden); }
  std::span<const double> b2() const { return block(off_b2(), shape_.num_classes); }
  std::span<const double> w3() const { return block(off_w3(), shape_.feat_dim * shape_.hidden); }

  std::size_t off_b1() const { return shape_.hidden * kDescriptorSize; }
  std::size_t off_w2() const { return off_b1() + shape_.hidden; }
  std::size_t off_b2() const { return off_w2() + shape_.num_classes * shape_.hidden; }
  std::size_t off_w3() const { return off_b2() + shape_.num_classes; }

  friend bool operator==(const ToyModel& a, const ToyModel& b) {
    return a.params_ == b.params_;
  }

 private:
  std::span<const double> block(std::size_t off, std::size_t len) const {
    return std::span<const double>(params_).subspan(off, len);
  }

  ModelShape shape_;
  std::vector<double> params_;
};

// Parameters uniform in [-0.1, 0.1] from a seeded generator.
inline ToyModel init_model(const ModelShape& shape, std::uint64_t seed) {
  ToyModel model(shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (double& p : model.parameters()) p = dist(rng);
  return model;
}

struct ForwardPass {
  DenseTensor<double> prediction;  // num_classes x H x W
  DenseTensor<double> features;    // feat_dim x H x W
  std::vector<double> descriptors;  // n x 5
  std::vector<double> hidden;       // n x hidden, post-tanh
};

template <typename T>
std::vector<double> pixel_descriptors(const DenseTensor<T>& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw ArgumentError("toy model needs a 1- or 3-channel image");
  }
  const std::size_t h = image.height(), w = image.width(), n = image.pixels();
  std::vector<double> d(n * kDescriptorSize);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      // Grayscale is replicated into all three color slots.
      const std::size_t src = image.channels() == 3 ? c : 0;
      d[i * kDescriptorSize + c] = static_cast<double>(image.at(src, i));
    }
    d[i * kDescriptorSize + 3] = static_cast<double>(i % w) / static_cast<double>(w);
    d[i * kDescriptorSize + 4] = static_cast<double>(i / w) / static_cast<double>(h);
  }
  return d;
}

template <typename T>
ForwardPass forward(const ToyModel& model, const DenseTensor<T>& image) {
  const ModelShape& s = model.shape();
  const std::size_t n = image.pixels();
  ForwardPass out{
      DenseTensor<double>(s.num_classes, image.height(), image.width()),
      DenseTensor<double>(s.feat_dim, image.height(), image.width()),
      pixel_descriptors(image), std::vector<double>(n * s.hidden)};
  auto w1 = model.w1(), b1 = model.b1(), w2 = model.w2(), b2 = model.b2(),
       w3 = model.w3();
  std::vector<double> logits(s.num_classes);
  for (std::size_t i = 0; i < n; ++i) {
    const double* d = &out.descriptors[i * kDescriptorSize];
    double* h = &out.hidden[i * s.hidden];
    for (std::size_t j = 0; j < s.hidden; ++j) {
      double a = b1[j];
      for (std::size_t k = 0; k < kDescriptorSize; ++k) {
        a += w1[j * kDescriptorSize + k] * d[k];
      }
      h[j] = std::tanh(a);
    }
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < s.num_classes; ++c) {
      double v = b2[c];
      for (std::size_t j = 0; j < s.hidden; ++j) v += w2[c * s.hidden + j] * h[j];
      logits[c] = v;
      peak = std::max(peak, v);
    }
    double norm = 0.0;
    for (std::size_t c = 0; c < s.num_classes; ++c) {
      logits[c] = std::exp(logits[c] - peak);
      norm += logits[c];
    }
    for (std::size_t c = 0; c < s.num_classes; ++c) {
      out.prediction.at(c, i) = logits[c] / norm;
    }
    for (std::size_t f = 0; f < s.feat_dim; ++f) {
      double v = 0.0;
      for (std::size_t j = 0; j < s.hidden; ++j) v += w3[f * s.hidden + j] * h[j];
      out.features.at(f, i) = v;
    }
  }
  return out;
}

// Chain rule from dL/dP and dL/dF back to the flat parameter vector.
inline std::vector<double> model_backward(const ToyModel& model,
                                          const ForwardPass& pass,
                                          const DenseTensor<double>& grad_p,
                                          const DenseTensor<double>* grad_f) {
  const ModelShape& s = model.shape();
  const std::size_t n = pass.prediction.pixels();
  std::vector<double> g(s.parameter_count(), 0.0);
  double* gw1 = g.data();
  double* gb1 = g.data() + model.off_b1();
  double* gw2 = g.data() + model.off_w2();
  double* gb2 = g.data() + model.off_b2();
  double* gw3 = g.data() + model.off_w3();
  auto w2 = model.w2(), w3 = model.w3();
  std::vector<double> dlogit(s.num_classes), dh(s.hidden);
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    for (std::size_t c = 0; c < s.num_classes; ++c) {
      inner += pass.prediction.at(c, i) * grad_p.at(c, i);
    }
    for (std::size_t c = 0; c < s.num_classes; ++c) {
      dlogit[c] = pass.prediction.at(c, i) * (grad_p.at(c, i) - inner);
    }
    const double* h = &pass.hidden[i * s.hidden];
    const double* d = &pass.descriptors[i * kDescriptorSize];
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t c = 0; c < s.num_classes; ++c) {
      gb2[c] += dlogit[c];
      for (std::size_t j = 0; j < s.hidden; ++j) {
        gw2[c * s.hidden + j] += dlogit[c] * h[j];
        dh[j] += w2[c * s.hidden + j] * dlogit[c];
      }
    }
    if (grad_f) {
      for (std::size_t f = 0; f < s.feat_dim; ++f) {
        const double df = grad_f->at(f, i);
        if (df == 0.0) continue;
        for (std::size_t j = 0; j < s.hidden; ++j) {
          gw3[f * s.hidden + j] += df * h[j];
          dh[j] += w3[f * s.hidden + j] * df;
        }
      }
    }
    for (std::size_t j = 0; j < s.hidden; ++j) {
      const double da = dh[j] * (1.0 - h[j] * h[j]);
      gb1[j] += da;
      for (std::size_t k = 0; k < kDescriptorSize; ++k) {
        gw1[j * kDescriptorSize + k] += da * d[k];
      }
    }
  }
  return g;
}

// dL/dF from dL/dt on the high-level tree, where t = exp(-w) and w is the
// squared feature distance across the tree edge.
inline DenseTensor<double> feature_gradient(
    const DenseTensor<double>& features, const AffinityTree& high,
    std::span<const double> grad_t) {
  DenseTensor<double> grad(features.channels(), features.height(),
                           features.width());
  const RootedTree& tree = high.tree;
  for (std::size_t i = 0; i < tree.num_nodes; ++i) {
    const std::uint32_t p = tree.parent[i];
    if (p == kNoNode || grad_t[i] == 0.0) continue;
    const double t = high.transmittance[i];
    // The clamp at the smallest normal double has zero slope.
    if (t <= std::numeric_limits<double>::min()) continue;
    const double grad_w = -grad_t[i] * t;
    for (std::size_t f = 0; f < features.channels(); ++f) {
      const double diff = features.at(f, i) - features.at(f, p);
      grad.at(f, i) += 2.0 * grad_w * diff;
      grad.at(f, p) -= 2.0 * grad_w * diff;
    }
  }
  return grad;
}

struct Metrics {
  double pixel_accuracy = 0.0;
  double mean_iou = 0.0;
  std::size_t valid_pixels = 0;
  bool empty = false;  // no non-ignore ground-truth pixels
};

inline std::size_t argmax_at(const DenseTensor<double>& scores, std::size_t i) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.channels(); ++c) {
    if (scores.at(c, i) > scores.at(best, i)) best = c;
  }
  return best;
}

// Pixel accuracy and mean IoU of argmax(scores) over non-ignore ground-truth
// pixels. Mean IoU averages over classes present in the ground truth.
inline Metrics evaluate(const DenseTensor<double>& scores,
                        const LabelMap& truth) {
  if (scores.height() != truth.height() || scores.width() != truth.width()) {
    throw ArgumentError("score and ground-truth sizes differ");
  }
  const std::size_t k = std::max<std::size_t>(
      scores.channels(), static_cast<std::size_t>(truth.num_classes()));
  std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0), present(k, 0);
  Metrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.pixels(); ++i) {
    if (!truth.is_labeled(i)) continue;
    const std::size_t gt = truth.at(i);
    const std::size_t pred = argmax_at(scores, i);
    ++m.valid_pixels;
    ++present[gt];
    if (pred == gt) {
      ++correct;
      ++tp[gt];
    } else {
      ++fp[pred];
      ++fn[gt];
    }
  }
  if (m.valid_pixels == 0) {
    m.empty = true;
    return m;
  }
  m.pixel_accuracy = static_cast<double>(correct) / static_cast<double>(m.valid_pixels);
  double iou_sum = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (present[c] == 0) continue;
    iou_sum += static_cast<double>(tp[c]) /
               static_cast<double>(tp[c] + fp[c] + fn[c]);
    ++classes;
  }
  m.mean_iou = iou_sum / static_cast<double>(classes);
  return m;
}

// Accuracy of argmax(scores) against `truth` restricted to pixels that are
// unlabeled in `sparse`. Returns 0 when that set is empty.
inline double unlabeled_accuracy(const DenseTensor<double>& scores,
                                 const LabelMap& truth,
                                 const LabelMap& sparse) {
  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < truth.pixels(); ++i) {
    if (sparse.is_labeled(i) || !truth.is_labeled(i)) continue;
    ++total;
    correct += argmax_at(scores, i) == truth.at(i);
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

struct TrainConfig {
  int steps = 500;
  double learning_rate = 0.5;
  double momentum = 0.0;
  std::uint64_t seed = 0;
  LossConfig loss;
  int eval_interval = 10;
  ModelShape shape;
  int threads = 1;

  void validate() const {
    if (steps < 1) throw ArgumentError("steps must be >= 1");
    if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) {
      throw ArgumentError("momentum must lie in [0, 1)");
    }
    if (eval_interval < 1) throw ArgumentError("eval interval must be >= 1");
    loss.validate();
  }
};

// Everything one evaluation of L at the current parameters produces.
struct Evaluation {
  ForwardPass pass;
  AffinityTree high;
  TotalLoss loss;
  std::vector<double> gradient;  // empty unless requested
};

template <typename T>
Evaluation evaluate_objective(const ToyModel& model, const DenseTensor<T>& image,
                              const LabelMap& sparse, const AffinityTree& low,
                              const LossConfig& config, bool with_gradient,
                              int threads = 1) {
  Evaluation ev;
  ev.pass = forward(model, image);
  // The high-level tree follows the current features: rebuilt every call.
  ev.high = build_affinity_tree(ev.pass.features, 1.0);
  ev.loss = total_loss(ev.pass.prediction, sparse, low, ev.high, config,
                       with_gradient, threads);
  if (with_gradient) {
    DenseTensor<double> grad_f =
        feature_gradient(ev.pass.features, ev.high, ev.loss.grad_high_transmittance);
    ev.gradient = model_backward(model, ev.pass, ev.loss.grad_prediction, &grad_f);
  }
  return ev;
}

namespace detail {

inline std::string range_of(std::span<const double> v, std::string_view name) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  bool any_nan = false;
  for (double x : v) {
    if (std::isnan(x)) {
      any_nan = true;
      continue;
    }
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  std::ostringstream os;
  os << name << " in [" << lo << ", " << hi << "]" << (any_nan ? " (NaN present)" : "");
  return os.str();
}

inline void check_finite(const Evaluation& ev, const AffinityTree& low) {
  bool ok = std::isfinite(ev.loss.value);
  for (double g : ev.gradient) ok = ok && std::isfinite(g);
  if (ok) return;
  auto non_root = [](const AffinityTree& a) {
    std::vector<double> v;
    for (std::size_t i = 0; i < a.tree.num_nodes; ++i) {
      if (i != a.tree.root) v.push_back(a.transmittance[i]);
    }
    return v;
  };
  std::ostringstream os;
  os << "non-finite loss " << ev.loss.value << " (seg " << ev.loss.seg
     << ", tree " << ev.loss.tree << "); "
     << range_of(ev.pass.prediction.data(), "P") << "; "
     << range_of(ev.pass.features.data(), "F") << "; "
     << range_of(non_root(low), "t_low") << "; "
     << range_of(non_root(ev.high), "t_high");
  throw NumericalError(os.str());
}

}  // namespace detail

struct StepResult {
  double loss = 0.0;
  double seg = 0.0;
  double tree = 0.0;
  DenseTensor<double> prediction;    // before the update
  DenseTensor<double> pseudo_label;  // before the update
};

// One gradient-descent update of every parameter (with optional momentum;
// `velocity` must then persist across calls).
template <typename T>
StepResult train_step(ToyModel& model, const DenseTensor<T>& image,
                      const LabelMap& sparse, const AffinityTree& low,
                      const TrainConfig& config,
                      std::vector<double>* velocity = nullptr) {
  Evaluation ev = evaluate_objective(model, image, sparse, low, config.loss,
                                     true, config.threads);
  detail::check_finite(ev, low);
  auto params = model.parameters();
  if (config.momentum > 0.0 && velocity != nullptr) {
    velocity->resize(params.size(), 0.0);
    for (std::size_t k = 0; k < params.size(); ++k) {
      (*velocity)[k] = config.momentum * (*velocity)[k] -
                       config.learning_rate * ev.gradient[k];
      params[k] += (*velocity)[k];
    }
  } else {
    for (std::size_t k = 0; k < params.size(); ++k) {
      params[k] -= config.learning_rate * ev.gradient[k];
    }
  }
  return {ev.loss.value, ev.loss.seg, ev.loss.tree,
          std::move(ev.pass.prediction), std::move(ev.loss.pseudo_label)};
}

struct StepRecord {
  int step = 0;
  double seg = 0.0;
  double tree = 0.0;
  double total = 0.0;
  double pixel_accuracy = 0.0;
  double mean_iou = 0.0;
  double pseudo_label_accuracy = 0.0;  // argmax of the pseudo label on unlabeled pixels
  double prediction_accuracy = 0.0;    // argmax of P on unlabeled pixels
};

// Owns the model, the cached low-level tree and optimizer state for one run.
// Record k describes the model after k updates; record 0 is the
// initialization and record `steps` the final model.
class Trainer {
 public:
  Trainer(DenseTensor<double> image, LabelMap sparse,
          std::optional<LabelMap> truth, TrainConfig config)
      : image_(std::move(image)), sparse_(std::move(sparse)),
        truth_(std::move(truth)), config_(config),
        model_(init_model(config.shape, config.seed)) {
    config_.validate();
    if (sparse_.height() != image_.height() || sparse_.width() != image_.width()) {
      throw ArgumentError("label map and image sizes differ");
    }
    if (truth_ && (truth_->height() != image_.height() ||
                   truth_->width() != image_.width())) {
      throw ArgumentError("ground truth and image sizes differ");
    }
    // Static per image: built once from the colors.
    low_ = build_affinity_tree(image_, config_.loss.sigma_low);
  }

  const ToyModel& model() const { return model_; }
  ToyModel& model() { return model_; }
  const AffinityTree& low_tree() const { return low_; }
  int steps_done() const { return steps_done_; }

  // Runs `steps` updates, calling `on_record` for record 0, every
  // eval_interval-th record and the final one.
  std::vector<StepRecord> run(
      const std::function<void(const StepRecord&)>& on_record = {}) {
    std::vector<StepRecord> records;
    auto emit = [&](const StepRecord& r) {
      records.push_back(r);
      if (on_record) on_record(r);
    };
    for (int k = 0; k < config_.steps; ++k) {
      StepResult res = train_step(model_, image_, sparse_, low_, config_, &velocity_);
      StepRecord rec = make_record(steps_done_, res.seg, res.tree, res.loss,
                                   res.prediction, res.pseudo_label);
      if (steps_done_ % config_.eval_interval == 0) emit(rec);
      ++steps_done_;
    }
    emit(current_record());
    return records;
  }

  // Losses and metrics of the current model without updating it.
  StepRecord current_record() const {
    Evaluation ev = evaluate_objective(model_, image_, sparse_, low_,
                                       config_.loss, false, config_.threads);
    return make_record(steps_done_, ev.loss.seg, ev.loss.tree, ev.loss.value,
                       ev.pass.prediction, ev.loss.pseudo_label);
  }

  DenseTensor<double> predict() const { return forward(model_, image_).prediction; }

 private:
  StepRecord make_record(int step, double seg, double tree, double total,
                         const DenseTensor<double>& prediction,
                         const DenseTensor<double>& pseudo) const {
    StepRecord r;
    r.step = step;
    r.seg = seg;
    r.tree = tree;
    r.total = total;
    if (truth_) {
      Metrics m = evaluate(prediction, *truth_);
      r.pixel_accuracy = m.pixel_accuracy;
      r.mean_iou = m.mean_iou;
      r.pseudo_label_accuracy = unlabeled_accuracy(pseudo, *truth_, sparse_);
      r.prediction_accuracy = unlabeled_accuracy(prediction, *truth_, sparse_);
    }
    return r;
  }

  DenseTensor<double> image_;
  LabelMap sparse_;
  std::optional<LabelMap> truth_;
  TrainConfig config_;
  ToyModel model_;
  AffinityTree low_;
  std::vector<double> velocity_;
  int steps_done_ = 0;
};

struct Fixture {
  DenseTensor<double> image;
  LabelMap truth;
  LabelMap sparse;
};

// Two color regions split at the vertical midline, with Gaussian color
// noise and one labeled pixel per region.
inline Fixture two_region_fixture(std::uint64_t seed, std::size_t size = 32,
                                  double noise = 0.02) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise);
  DenseTensor<double> image(3, size, size);
  std::vector<std::uint8_t> labels(size * size);
  const double left[3] = {0.9, 0.1, 0.1};
  const double right[3] = {0.1, 0.1, 0.9};
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const bool is_left = x < size / 2;
      labels[y * size + x] = is_left ? 0 : 1;
      for (std::size_t c = 0; c < 3; ++c) {
        const double base = is_left ? left[c] : right[c];
        image(c, y, x) = std::clamp(base + gauss(rng), 0.0, 1.0);
      }
    }
  }
  LabelMap truth(size, size, 2, std::move(labels));
  LabelMap sparse = sample_point_annotation(truth, 1, rng());
  return {std::move(image), std::move(truth), std::move(sparse)};
}

// Alternating cells of two colors on a `cells` x `cells` board; one labeled
// pixel per cell.
inline Fixture checkerboard_fixture(std::uint64_t seed, std::size_t size = 32,
                                    std::size_t cells = 4, double noise = 0.02) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise);
  DenseTensor<double> image(3, size, size);
  std::vector<std::uint8_t> labels(size * size);
  const double colors[2][3] = {{0.9, 0.8, 0.2}, {0.2, 0.3, 0.8}};
  const std::size_t cell = std::max<std::size_t>(1, size / cells);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const std::uint8_t cls = ((y / cell) + (x / cell)) % 2;
      labels[y * size + x] = cls;
      for (std::size_t c = 0; c < 3; ++c) {
        image(c, y, x) = std::clamp(colors[cls][c] + gauss(rng), 0.0, 1.0);
      }
    }
  }
  LabelMap truth(size, size, 2, std::move(labels));
  LabelMap sparse = sample_point_annotation(truth, 1, rng());
  return {std::move(image), std::move(truth), std::move(sparse)};
}

}  // namespace tel

#endif  // TEL_TOY_TRAIN_HPP_
