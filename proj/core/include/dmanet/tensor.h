/* Copyright 2026 The DMA-Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef DMANET_TENSOR_H_
#define DMANET_TENSOR_H_

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmanet {

// Error taxonomy shared by every module.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::int64_t>;

std::string ShapeToString(const Shape& shape);
std::int64_t NumElements(const Shape& shape);

// Dense row-major array of doubles. Feature maps are rank 4 (N, C, H, W);
// parameters may have any rank.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor Scalar(double v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // NCHW accessors; only valid on rank-4 tensors.
  double& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  double at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }

  void Fill(double v);
  Tensor Reshaped(Shape shape) const;
  bool AllFinite() const;
  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Throws ShapeError unless `t` is rank 4 with every dimension >= 1.
void RequireFeatureMap(const Tensor& t, const std::string& what);

inline constexpr std::uint8_t kIgnoreId = 255;

// Per-pixel class ids, (batch, height, width).
struct LabelMap {
  std::int64_t batch = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint8_t> data;

  LabelMap() = default;
  LabelMap(std::int64_t n, std::int64_t h, std::int64_t w, std::uint8_t fill = 0)
      : batch(n), height(h), width(w), data(static_cast<std::size_t>(n * h * w), fill) {}

  std::uint8_t& at(std::int64_t n, std::int64_t h, std::int64_t w) {
    return data[static_cast<std::size_t>((n * height + h) * width + w)];
  }
  std::uint8_t at(std::int64_t n, std::int64_t h, std::int64_t w) const {
    return data[static_cast<std::size_t>((n * height + h) * width + w)];
  }
  std::int64_t pixels() const { return batch * height * width; }
  bool operator==(const LabelMap&) const = default;
};

// Throws ValidationError if any id is >= num_classes and not kIgnoreId.
void ValidateLabels(const LabelMap& labels, int num_classes);

}  // namespace dmanet

#endif  // DMANET_TENSOR_H_
