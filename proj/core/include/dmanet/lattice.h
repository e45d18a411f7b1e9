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
#ifndef DMANET_LATTICE_H_
#define DMANET_LATTICE_H_

#include <array>
#include <string>
#include <utility>

#include "dmanet/layers.h"

namespace dmanet {

// Conv-BN-ReLU. The conv has no bias and its padding equals the atrous rate
// times (k - 1) / 2, so spatial size is preserved.
struct CbrParams {
  ConvLayer conv;
  BatchNormLayer bn;

  void Visit(const std::string& prefix, ParamVisitor& v);
};

CbrParams MakeCbr(std::int64_t c_in, std::int64_t c_out, int kernel, int rate, Rng& rng);
Var CbrForward(const CbrParams& params, const Var& x, bool training);

// 1x1 conv to two channels followed by a sigmoid; channel 0 is the A head,
// channel 1 the B head.
struct WlbParams {
  ConvLayer conv;

  void Visit(const std::string& prefix, ParamVisitor& v);
};

WlbParams MakeWlb(std::int64_t c_in, Rng& rng);

struct LatticeWeights {
  Var a;  // (N, 1, H, W)
  Var b;  // (N, 1, H, W)
};

LatticeWeights WeightLearningForward(const WlbParams& params, const Var& x);

struct LatticeOutputs {
  Var p;  // ReLU(x + B*t)
  Var q;  // ReLU(A*x + t)
  Var f;  // p + q
};

// Butterfly combine of an input path `x` and a transformed path `t`; the
// single-channel weights are broadcast along channels.
LatticeOutputs LatticeCombine(const Var& x, const Var& t, const Var& a, const Var& b);

struct LerbParams {
  // Contextual enhanced block: conv(rate r0)-BN-ReLU-conv(rate r1)-BN.
  ConvLayer ctx_conv1;
  BatchNormLayer ctx_bn1;
  ConvLayer ctx_conv2;
  BatchNormLayer ctx_bn2;
  WlbParams wlb_c;
  // Spatial enhanced block over concat(F_c, M): conv-BN.
  ConvLayer spatial_conv;
  BatchNormLayer spatial_bn;
  WlbParams wlb_s;

  std::int64_t channels() const { return ctx_conv1.out_channels(); }
  std::int64_t side_channels() const { return spatial_conv.in_channels() - channels(); }
  void Visit(const std::string& prefix, ParamVisitor& v);
};

LerbParams MakeLerb(std::int64_t channels, std::int64_t side_channels, std::array<int, 2> rates, Rng& rng);

// C(x): the contextual enhanced block alone.
Var ContextualBlock(const LerbParams& params, const Var& x, bool training);
// S(concat(f_c, m)): the spatial enhanced block alone.
Var SpatialBlock(const LerbParams& params, const Var& f_c, const Var& m, bool training);

Var ContextualModuleForward(const LerbParams& params, const Var& x, bool training);
Var SpatialModuleForward(const LerbParams& params, const Var& f_c, const Var& m, bool training);

// Y = concat(F_c, F_s), 2C channels.
Var LerbForward(const LerbParams& params, const Var& x, const Var& m, bool training);

}  // namespace dmanet

#endif  // DMANET_LATTICE_H_
