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
#include "dmanet/losses.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace dmanet {
namespace {

void CheckLogitLabelShapes(const Tensor& logits, const LabelMap& labels) {
  RequireFeatureMap(logits, "loss logits");
  if (logits.dim(0) != labels.batch || logits.dim(2) != labels.height || logits.dim(3) != labels.width) {
    throw ShapeError("loss: logits " + ShapeToString(logits.shape()) + " do not match labels (" +
                     std::to_string(labels.batch) + "," + std::to_string(labels.height) + "," +
                     std::to_string(labels.width) + ")");
  }
  ValidateLabels(labels, static_cast<int>(logits.dim(1)));
}

struct PixelTerms {
  std::vector<double> loss;  // -log p_true, NaN for ignored
  std::vector<double> prob;  // p_true
};

PixelTerms ComputePixelTerms(const Tensor& logits, const LabelMap& labels) {
  const std::int64_t n = logits.dim(0), k = logits.dim(1), plane = logits.dim(2) * logits.dim(3);
  PixelTerms terms;
  terms.loss.assign(static_cast<std::size_t>(n * plane), std::numeric_limits<double>::quiet_NaN());
  terms.prob.assign(terms.loss.size(), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < plane; ++j) {
      const auto idx = static_cast<std::size_t>(i * plane + j);
      const std::uint8_t y = labels.data[idx];
      if (y == kIgnoreId) continue;
      const double* base = logits.data() + i * k * plane + j;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::int64_t c = 0; c < k; ++c) mx = std::max(mx, base[c * plane]);
      double s = 0.0;
      for (std::int64_t c = 0; c < k; ++c) s += std::exp(base[c * plane] - mx);
      const double log_p = base[y * plane] - mx - std::log(s);
      terms.loss[idx] = -log_p;
      terms.prob[idx] = std::exp(log_p);
    }
  }
  return terms;
}

// Mean loss over `kept` pixel indices (ascending), with the matching gradient.
Var MeanOverKept(const Var& logits, const LabelMap& labels, const PixelTerms& terms, std::vector<std::size_t> kept) {
  if (kept.empty()) {
    return MakeResult(Tensor::Scalar(0.0), {logits}, [](Node&) {});
  }
  double sum = 0.0;
  for (auto idx : kept) sum += terms.loss[idx];
  const double mean = sum / static_cast<double>(kept.size());
  const Shape shape = logits.shape();
  return MakeResult(Tensor::Scalar(mean), {logits}, [kept = std::move(kept), labels, shape](Node& self) {
    Node* ln = self.inputs[0].get();
    const std::int64_t k = shape[1], plane = shape[2] * shape[3];
    const double g = self.grad[0] / static_cast<double>(kept.size());
    Tensor& gx = ln->GradBuffer();
    for (auto idx : kept) {
      const auto i = static_cast<std::int64_t>(idx) / plane;
      const auto j = static_cast<std::int64_t>(idx) % plane;
      const double* base = ln->value.data() + i * k * plane + j;
      double* gbase = gx.data() + i * k * plane + j;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::int64_t c = 0; c < k; ++c) mx = std::max(mx, base[c * plane]);
      double s = 0.0;
      for (std::int64_t c = 0; c < k; ++c) s += std::exp(base[c * plane] - mx);
      const std::uint8_t y = labels.data[idx];
      for (std::int64_t c = 0; c < k; ++c) {
        const double p = std::exp(base[c * plane] - mx) / s;
        gbase[c * plane] += g * (p - (c == y ? 1.0 : 0.0));
      }
    }
  });
}

}  // namespace

void OhemConfig::Validate() const {
  if (!(prob_threshold > 0.0 && prob_threshold <= 1.0)) {
    throw ConfigError("ohem.prob_threshold must be in (0, 1], got " + std::to_string(prob_threshold));
  }
  if (!(min_keep_fraction > 0.0 && min_keep_fraction <= 1.0)) {
    throw ConfigError("ohem.min_keep_fraction must be in (0, 1], got " + std::to_string(min_keep_fraction));
  }
}

std::vector<double> PerPixelCrossEntropy(const Tensor& logits, const LabelMap& labels) {
  CheckLogitLabelShapes(logits, labels);
  return ComputePixelTerms(logits, labels).loss;
}

Var PixelCrossEntropy(const Var& logits, const LabelMap& labels) {
  CheckLogitLabelShapes(logits.value(), labels);
  PixelTerms terms = ComputePixelTerms(logits.value(), labels);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    if (labels.data[i] != kIgnoreId) kept.push_back(i);
  }
  return MeanOverKept(logits, labels, terms, std::move(kept));
}

Var OhemCrossEntropy(const Var& logits, const LabelMap& labels, const OhemConfig& cfg) {
  cfg.Validate();
  CheckLogitLabelShapes(logits.value(), labels);
  PixelTerms terms = ComputePixelTerms(logits.value(), labels);
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    if (labels.data[i] != kIgnoreId) valid.push_back(i);
  }
  const auto min_keep = static_cast<std::size_t>(std::ceil(cfg.min_keep_fraction * static_cast<double>(valid.size())));
  std::vector<std::size_t> kept;
  for (auto idx : valid) {
    if (terms.prob[idx] < cfg.prob_threshold) kept.push_back(idx);
  }
  if (kept.size() < min_keep) {
    // Hardest first; equal losses keep pixel order.
    std::vector<std::size_t> order = valid;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return terms.loss[a] > terms.loss[b]; });
    kept.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(min_keep));
    std::sort(kept.begin(), kept.end());
  }
  return MeanOverKept(logits, labels, terms, std::move(kept));
}

Var JointLoss(const ModelOutputs& outputs, const LabelMap& labels, double lambda, const OhemConfig& cfg) {
  if (!(lambda >= 0.0)) throw ConfigError("joint loss: lambda must be >= 0, got " + std::to_string(lambda));
  Var total = OhemCrossEntropy(outputs.principal, labels, cfg);
  if (lambda == 0.0) return total;
  if (!outputs.aux_mid.defined() || !outputs.aux_high.defined()) {
    throw ConfigError("joint loss: lambda > 0 requires the auxiliary heads");
  }
  Var aux = Add(OhemCrossEntropy(outputs.aux_mid, labels, cfg), OhemCrossEntropy(outputs.aux_high, labels, cfg));
  return Add(total, Scale(aux, lambda));
}

}  // namespace dmanet
