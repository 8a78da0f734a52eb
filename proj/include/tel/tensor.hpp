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

#ifndef TEL_TENSOR_HPP_
#define TEL_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tel {

// Error hierarchy. Every failure raised by the library derives from Error so
// callers (the CLI in particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller-supplied argument (zero dimension, sigma <= 0, ratio out of
// range, shape mismatch).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed data that violates a domain invariant (label out of range).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Graph structure problems: disconnected input, cycles.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Request exceeds a hard size limit (dense oracles).
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Misuse of a stateful protocol, e.g. backward with a stale workspace.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Non-finite values encountered during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// C x H x W array stored in row-major (channel, row, column) order.
template <typename T>
class DenseTensor {
 public:
  using value_type = T;

  DenseTensor() = default;

  DenseTensor(std::size_t channels, std::size_t height, std::size_t width,
              T fill = T{})
      : channels_(channels), height_(height), width_(width) {
    check_dims(channels, height, width);
    data_.assign(channels * height * width, fill);
  }

  DenseTensor(std::size_t channels, std::size_t height, std::size_t width,
              std::vector<T> data)
      : channels_(channels), height_(height), width_(width),
        data_(std::move(data)) {
    check_dims(channels, height, width);
    if (data_.size() != channels * height * width) {
      throw ArgumentError("tensor data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(channels) + "x" +
                          std::to_string(height) + "x" + std::to_string(width));
    }
  }

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }
  const T& operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }

  // Access by channel and linear pixel index (row * width + col).
  T& at(std::size_t c, std::size_t pixel) { return data_[c * pixels() + pixel]; }
  const T& at(std::size_t c, std::size_t pixel) const {
    return data_[c * pixels() + pixel];
  }

  std::span<T> channel(std::size_t c) {
    return std::span<T>(data_).subspan(c * pixels(), pixels());
  }
  std::span<const T> channel(std::size_t c) const {
    return std::span<const T>(data_).subspan(c * pixels(), pixels());
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool same_shape(const DenseTensor& other) const {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }

  template <typename U>
  bool same_shape(const DenseTensor<U>& other) const {
    return channels_ == other.channels() && height_ == other.height() &&
           width_ == other.width();
  }

  template <typename U>
  DenseTensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return DenseTensor<U>(channels_, height_, width_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  std::pair<T, T> minmax() const {
    auto [lo, hi] = std::minmax_element(data_.begin(), data_.end());
    return {*lo, *hi};
  }

  friend bool operator==(const DenseTensor& a, const DenseTensor& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  static void check_dims(std::size_t c, std::size_t h, std::size_t w) {
    if (c == 0 || h == 0 || w == 0) {
      throw ArgumentError("tensor dimensions must be positive");
    }
  }

  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

inline constexpr std::uint8_t kIgnoreLabel = 255;

// H x W per-pixel class indices. Pixels equal to kIgnoreLabel form the
// unlabeled set; every other value is a class index below num_classes.
class LabelMap {
 public:
  LabelMap() = default;

  LabelMap(std::size_t height, std::size_t width, int num_classes,
           std::uint8_t fill = kIgnoreLabel)
      : height_(height), width_(width), num_classes_(num_classes) {
    check_shape();
    labels_.assign(height * width, fill);
    validate();
  }

  LabelMap(std::size_t height, std::size_t width, int num_classes,
           std::vector<std::uint8_t> labels)
      : height_(height), width_(width), num_classes_(num_classes),
        labels_(std::move(labels)) {
    check_shape();
    if (labels_.size() != height * width) {
      throw ArgumentError("label data length does not match map size");
    }
    validate();
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return labels_.size(); }
  int num_classes() const { return num_classes_; }

  std::uint8_t operator()(std::size_t y, std::size_t x) const {
    return labels_[y * width_ + x];
  }
  std::uint8_t at(std::size_t pixel) const { return labels_[pixel]; }
  bool is_labeled(std::size_t pixel) const {
    return labels_[pixel] != kIgnoreLabel;
  }

  void set(std::size_t pixel, std::uint8_t value) {
    check_value(pixel, value);
    labels_[pixel] = value;
  }

  std::span<const std::uint8_t> labels() const { return labels_; }

  std::size_t labeled_count() const {
    return static_cast<std::size_t>(
        std::count_if(labels_.begin(), labels_.end(),
                      [](std::uint8_t v) { return v != kIgnoreLabel; }));
  }
  std::size_t unlabeled_count() const { return pixels() - labeled_count(); }

  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ &&
           a.num_classes_ == b.num_classes_ && a.labels_ == b.labels_;
  }

 private:
  void check_shape() const {
    if (height_ == 0 || width_ == 0) {
      throw ArgumentError("label map dimensions must be positive");
    }
    if (num_classes_ < 1 || num_classes_ > 255) {
      throw ArgumentError("num_classes must lie in [1, 255], got " +
                          std::to_string(num_classes_));
    }
  }

  void check_value(std::size_t pixel, std::uint8_t v) const {
    if (v != kIgnoreLabel && v >= num_classes_) {
      throw ValidationError(
          "label " + std::to_string(v) + " at (row " +
          std::to_string(pixel / width_) + ", col " +
          std::to_string(pixel % width_) + ") is not below num_classes=" +
          std::to_string(num_classes_));
    }
  }

  void validate() const {
    for (std::size_t i = 0; i < labels_.size(); ++i) check_value(i, labels_[i]);
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  int num_classes_ = 0;
  std::vector<std::uint8_t> labels_;
};

}  // namespace tel

#endif  // TEL_TENSOR_HPP_
