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
#ifndef DMANET_FEATURE_TRANSFORM_H_
#define DMANET_FEATURE_TRANSFORM_H_

#include <string>

#include "dmanet/lattice.h"

namespace dmanet {

// Feature transformation block: spatial and channel attention heads fused by
// per-sample softmax weights (v, w) into a transformation tensor T, applied
// multiplicatively to the CBR output.
struct FtbParams {
  CbrParams cbr;               // C_in -> C'
  ConvLayer spatial_conv;      // 1x1, C' -> 1, with bias
  double leaky_slope = 0.01;
  ConvLayer channel_conv;      // 1x1, C' -> C', no bias (BN follows)
  BatchNormLayer channel_bn;
  ConvLayer channel_linear;    // C' -> C' on the 1x1 map, with bias
  ConvLayer weight_linear;     // C' -> 2 logits, with bias

  std::int64_t channels() const { return cbr.conv.out_channels(); }
  void Visit(const std::string& prefix, ParamVisitor& v);
};

FtbParams MakeFtb(std::int64_t c_in, std::int64_t c_out, Rng& rng);

struct FtbWeights {
  Var v;  // (N, 1, 1, 1), spatial-head weight
  Var w;  // (N, 1, 1, 1), channel-head weight
};

// Softmax over the two logits of the weight path; `x_g` must be (N, C', 1, 1).
FtbWeights FtbWeightsForward(const FtbParams& params, const Var& x_g);

// Every intermediate of one FTB evaluation.
struct FtbTrace {
  Var x_f;  // CBR output
  Var x_s;  // (N, 1, H, W)
  Var x_g;  // (N, C', 1, 1)
  Var x_c;  // (N, C', 1, 1)
  FtbWeights weights;
  Var t;    // transformation tensor, same shape as x_f
  Var out;  // t * x_f
};

FtbTrace FtbForwardTrace(const FtbParams& params, const Var& x, bool training);
Var FtbForward(const FtbParams& params, const Var& x, bool training);

}  // namespace dmanet

#endif  // DMANET_FEATURE_TRANSFORM_H_
