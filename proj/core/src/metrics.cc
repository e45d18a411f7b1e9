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
#include "dmanet/metrics.h"

#include <cstdio>
#include <numeric>
#include <sstream>

namespace dmanet {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : num_classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(num_classes)) {
  if (num_classes < 1) throw ConfigError("confusion matrix needs at least one class");
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void ConfusionMatrix::Update(const LabelMap& pred, const LabelMap& truth) {
  if (pred.batch != truth.batch || pred.height != truth.height || pred.width != truth.width) {
    throw ValidationError("confusion update: prediction and truth shapes differ");
  }
  for (std::size_t i = 0; i < truth.data.size(); ++i) {
    const int t = truth.data[i];
    const int p = pred.data[i];
    if (p >= num_classes_) {
      throw ValidationError("confusion update: predicted id " + std::to_string(p) + " out of range");
    }
    if (t == kIgnoreId) continue;
    if (t >= num_classes_) throw ValidationError("confusion update: truth id " + std::to_string(t) + " out of range");
    ++counts_[Index(t, p)];
  }
}

void ConfusionMatrix::Merge(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) throw ValidationError("confusion merge: class counts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::vector<std::optional<double>> ConfusionMatrix::IouPerClass() const {
  std::vector<std::optional<double>> iou(static_cast<std::size_t>(num_classes_));
  for (int k = 0; k < num_classes_; ++k) {
    std::uint64_t row = 0, col = 0;
    for (int j = 0; j < num_classes_; ++j) {
      row += at(k, j);
      col += at(j, k);
    }
    const std::uint64_t tp = at(k, k);
    const std::uint64_t uni = row + col - tp;
    if (uni > 0) iou[static_cast<std::size_t>(k)] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  return iou;
}

double ConfusionMatrix::MeanIou() const {
  double sum = 0.0;
  int defined = 0;
  for (const auto& v : IouPerClass()) {
    if (v) {
      sum += *v;
      ++defined;
    }
  }
  if (defined == 0) throw ValidationError("mean IoU: no class has a non-empty union");
  return sum / defined;
}

double ConfusionMatrix::PixelAccuracy() const {
  const std::uint64_t n = total();
  if (n == 0) throw ValidationError("pixel accuracy: empty confusion matrix");
  std::uint64_t diag = 0;
  for (int k = 0; k < num_classes_; ++k) diag += at(k, k);
  return static_cast<double>(diag) / static_cast<double>(n);
}

std::string FormatMetricReport(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
  std::ostringstream os;
  const auto iou = cm.IouPerClass();
  char buf[128];
  os << "# per-class IoU (%)\n";
  std::snprintf(buf, sizeof(buf), "%-4s %-16s %8s\n", "id", "class", "IoU");
  os << buf;
  for (int k = 0; k < cm.num_classes(); ++k) {
    const std::string name =
        static_cast<std::size_t>(k) < class_names.size() ? class_names[static_cast<std::size_t>(k)] : "class_" + std::to_string(k);
    const auto& v = iou[static_cast<std::size_t>(k)];
    if (v) {
      std::snprintf(buf, sizeof(buf), "%-4d %-16s %8.2f\n", k, name.c_str(), 100.0 * *v);
    } else {
      std::snprintf(buf, sizeof(buf), "%-4d %-16s %8s\n", k, name.c_str(), "-");
    }
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "mIoU %.4f\npixel_accuracy %.4f\n", cm.MeanIou(), cm.PixelAccuracy());
  os << buf;
  return os.str();
}

}  // namespace dmanet
