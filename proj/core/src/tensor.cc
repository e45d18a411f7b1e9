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
#include "dmanet/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dmanet {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

std::int64_t NumElements(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(NumElements(shape_)), fill) {
  for (auto d : shape_) {
    if (d < 0) throw ShapeError("negative dimension in shape " + ShapeToString(shape_));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<std::int64_t>(data_.size()) != NumElements(shape_)) {
    throw ShapeError("data size " + std::to_string(data_.size()) + " does not match shape " +
                     ShapeToString(shape_));
  }
}

void Tensor::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::Reshaped(Shape shape) const {
  if (NumElements(shape) != size()) {
    throw ShapeError("cannot reshape " + ShapeToString(shape_) + " to " + ShapeToString(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void RequireFeatureMap(const Tensor& t, const std::string& what) {
  if (t.rank() != 4) {
    throw ShapeError(what + ": expected rank-4 feature map, got shape " + ShapeToString(t.shape()));
  }
  for (auto d : t.shape()) {
    if (d < 1) throw ShapeError(what + ": empty dimension in shape " + ShapeToString(t.shape()));
  }
}

void ValidateLabels(const LabelMap& labels, int num_classes) {
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    const auto id = labels.data[i];
    if (id != kIgnoreId && id >= num_classes) {
      throw ValidationError("label id " + std::to_string(id) + " at flat index " + std::to_string(i) +
                            " is out of range for " + std::to_string(num_classes) + " classes");
    }
  }
}

}  // namespace dmanet
