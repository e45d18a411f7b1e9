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
#include "dmanet/layers.h"

#include <cmath>

namespace dmanet {

Tensor KaimingNormal(const Shape& shape, std::int64_t fan_in, Rng& rng) {
  Tensor t(shape);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

void ConvLayer::Visit(const std::string& prefix, ParamVisitor& v) {
  v.Param(JoinName(prefix, "weight"), weight, Decay::kApply);
  if (bias.defined()) v.Param(JoinName(prefix, "bias"), bias, bias_decay);
}

ConvLayer MakeConv(std::int64_t c_in, std::int64_t c_out, int kernel, ConvGeometry geometry, bool with_bias,
                   Rng& rng) {
  ConvLayer conv;
  conv.weight = Var::Parameter(KaimingNormal(Shape{c_out, c_in, kernel, kernel}, c_in * kernel * kernel, rng));
  if (with_bias) conv.bias = Var::Parameter(Tensor(Shape{c_out}));
  conv.geometry = geometry;
  return conv;
}

Var Forward(const ConvLayer& conv, const Var& x) { return Conv2d(x, conv.weight, conv.bias, conv.geometry); }

void BatchNormLayer::Visit(const std::string& prefix, ParamVisitor& v) {
  v.Param(JoinName(prefix, "weight"), gamma, Decay::kExempt);
  v.Param(JoinName(prefix, "bias"), beta, Decay::kExempt);
  v.Buffer(JoinName(prefix, "running_mean"), running_mean);
  v.Buffer(JoinName(prefix, "running_var"), running_var);
}

BatchNormLayer MakeBatchNorm(std::int64_t channels) {
  BatchNormLayer bn;
  bn.gamma = Var::Parameter(Tensor(Shape{channels}, 1.0));
  bn.beta = Var::Parameter(Tensor(Shape{channels}, 0.0));
  bn.running_mean = Tensor(Shape{channels}, 0.0);
  bn.running_var = Tensor(Shape{channels}, 1.0);
  return bn;
}

Var Forward(const BatchNormLayer& bn, const Var& x, bool training) {
  return BatchNorm2d(x, bn.gamma, bn.beta, bn.running_mean, bn.running_var, training, bn.momentum, bn.eps);
}

}  // namespace dmanet
