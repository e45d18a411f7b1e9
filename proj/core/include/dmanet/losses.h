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
#ifndef DMANET_LOSSES_H_
#define DMANET_LOSSES_H_

#include <vector>

#include "dmanet/autograd.h"
#include "dmanet/dma_net.h"

namespace dmanet {

struct OhemConfig {
  // Pixels whose true-class probability is below this are "hard".
  double prob_threshold = 0.7;
  // At least ceil(fraction * valid pixels) of the hardest pixels are kept.
  double min_keep_fraction = 1.0 / 16.0;

  void Validate() const;
};

// Mean of -log softmax(true class) over non-ignored pixels; 0 when every
// pixel is ignored. Throws ValidationError on out-of-range labels.
Var PixelCrossEntropy(const Var& logits, const LabelMap& labels);

// Cross entropy averaged over the kept (hard) pixel set. The kept set is
// treated as a constant when differentiating.
Var OhemCrossEntropy(const Var& logits, const LabelMap& labels, const OhemConfig& cfg);

// principal + lambda * (aux_mid + aux_high), each an OHEM cross entropy.
// Throws ConfigError when lambda < 0.
Var JointLoss(const ModelOutputs& outputs, const LabelMap& labels, double lambda, const OhemConfig& cfg);

// Per-pixel -log p(true class); ignored pixels are reported as NaN.
std::vector<double> PerPixelCrossEntropy(const Tensor& logits, const LabelMap& labels);

}  // namespace dmanet

#endif  // DMANET_LOSSES_H_
