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
#ifndef DMANET_METRICS_H_
#define DMANET_METRICS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmanet/tensor.h"

namespace dmanet {

// K x K counts; rows are ground truth, columns prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return num_classes_; }
  std::uint64_t at(int truth, int pred) const { return counts_[Index(truth, pred)]; }
  std::uint64_t total() const;

  // Pixels whose truth is the ignore id are skipped. Throws ValidationError
  // when the maps differ in shape or hold an id outside [0, K); `pred` may
  // not use the ignore id.
  void Update(const LabelMap& pred, const LabelMap& truth);
  void Merge(const ConfusionMatrix& other);

  // tp / (tp + fp + fn); nullopt where the union is empty.
  std::vector<std::optional<double>> IouPerClass() const;
  // Mean over defined classes; throws ValidationError if none is defined.
  double MeanIou() const;
  // trace / total; throws ValidationError on an empty matrix.
  double PixelAccuracy() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t Index(int truth, int pred) const {
    return static_cast<std::size_t>(truth) * static_cast<std::size_t>(num_classes_) + static_cast<std::size_t>(pred);
  }

  int num_classes_;
  std::vector<std::uint64_t> counts_;
};

// Per-class IoU table followed by mIoU and pixel accuracy. Undefined classes
// print as "-". `class_names` may be empty (ids are used).
std::string FormatMetricReport(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);

}  // namespace dmanet

#endif  // DMANET_METRICS_H_
