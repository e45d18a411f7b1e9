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
#include "dmanet/feature_transform.h"

namespace dmanet {

void FtbParams::Visit(const std::string& prefix, ParamVisitor& v) {
  cbr.Visit(JoinName(prefix, "cbr"), v);
  spatial_conv.Visit(JoinName(prefix, "spatial"), v);
  channel_conv.Visit(JoinName(prefix, "channel.conv"), v);
  channel_bn.Visit(JoinName(prefix, "channel.bn"), v);
  channel_linear.Visit(JoinName(prefix, "channel.linear"), v);
  weight_linear.Visit(JoinName(prefix, "weight"), v);
}

FtbParams MakeFtb(std::int64_t c_in, std::int64_t c_out, Rng& rng) {
  FtbParams p;
  p.cbr = MakeCbr(c_in, c_out, 3, 1, rng);
  p.spatial_conv = MakeConv(c_out, 1, 1, {}, true, rng);
  p.channel_conv = MakeConv(c_out, c_out, 1, {}, false, rng);
  p.channel_bn = MakeBatchNorm(c_out);
  p.channel_linear = MakeConv(c_out, c_out, 1, {}, true, rng);
  p.weight_linear = MakeConv(c_out, 2, 1, {}, true, rng);
  p.weight_linear.bias_decay = Decay::kExempt;
  return p;
}

FtbWeights FtbWeightsForward(const FtbParams& params, const Var& x_g) {
  RequireFeatureMap(x_g.value(), "ftb weight path input");
  if (x_g.shape()[2] != 1 || x_g.shape()[3] != 1) {
    throw ShapeError("ftb weight path: expected a 1x1 pooled map, got " + ShapeToString(x_g.shape()));
  }
  Var probs = SoftmaxChannels(Forward(params.weight_linear, x_g));
  return {SliceChannels(probs, 0, 1), SliceChannels(probs, 1, 1)};
}

FtbTrace FtbForwardTrace(const FtbParams& params, const Var& x, bool training) {
  FtbTrace tr;
  tr.x_f = CbrForward(params.cbr, x, training);
  tr.x_s = LeakyRelu(Forward(params.spatial_conv, tr.x_f), params.leaky_slope);
  tr.x_g = GlobalAvgPool(tr.x_f);
  tr.x_c = Forward(params.channel_linear,
                   Relu(Forward(params.channel_bn, Forward(params.channel_conv, tr.x_g), training)));
  tr.weights = FtbWeightsForward(params, tr.x_g);
  // v*X_s broadcasts along channels, w*X_c along space.
  tr.t = Sigmoid(Add(Mul(tr.weights.v, tr.x_s), Mul(tr.weights.w, tr.x_c)));
  tr.out = Mul(tr.t, tr.x_f);
  return tr;
}

Var FtbForward(const FtbParams& params, const Var& x, bool training) {
  return FtbForwardTrace(params, x, training).out;
}

}  // namespace dmanet
