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
#include "dmanet/lattice.h"

namespace dmanet {
namespace {

void RequireChannels(const Var& x, std::int64_t expected, const char* what) {
  RequireFeatureMap(x.value(), what);
  if (x.shape()[1] != expected) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) + " channels, got " +
                     ShapeToString(x.shape()));
  }
}

}  // namespace

void CbrParams::Visit(const std::string& prefix, ParamVisitor& v) {
  conv.Visit(JoinName(prefix, "conv"), v);
  bn.Visit(JoinName(prefix, "bn"), v);
}

CbrParams MakeCbr(std::int64_t c_in, std::int64_t c_out, int kernel, int rate, Rng& rng) {
  CbrParams p;
  p.conv = MakeConv(c_in, c_out, kernel, {1, rate * (kernel - 1) / 2, rate}, false, rng);
  p.bn = MakeBatchNorm(c_out);
  return p;
}

Var CbrForward(const CbrParams& params, const Var& x, bool training) {
  return Relu(Forward(params.bn, Forward(params.conv, x), training));
}

void WlbParams::Visit(const std::string& prefix, ParamVisitor& v) { conv.Visit(JoinName(prefix, "conv"), v); }

WlbParams MakeWlb(std::int64_t c_in, Rng& rng) {
  WlbParams p;
  p.conv = MakeConv(c_in, 2, 1, {}, true, rng);
  p.conv.bias_decay = Decay::kExempt;
  return p;
}

LatticeWeights WeightLearningForward(const WlbParams& params, const Var& x) {
  RequireChannels(x, params.conv.in_channels(), "weight learning block input");
  Var s = Sigmoid(Forward(params.conv, x));
  return {SliceChannels(s, 0, 1), SliceChannels(s, 1, 1)};
}

LatticeOutputs LatticeCombine(const Var& x, const Var& t, const Var& a, const Var& b) {
  RequireFeatureMap(x.value(), "lattice input x");
  RequireFeatureMap(t.value(), "lattice input t");
  if (x.shape() != t.shape()) {
    throw ShapeError("lattice: operand t " + ShapeToString(t.shape()) + " does not match x " + ShapeToString(x.shape()));
  }
  const Shape weight_shape{x.shape()[0], 1, x.shape()[2], x.shape()[3]};
  if (a.shape() != weight_shape) {
    throw ShapeError("lattice: weight A " + ShapeToString(a.shape()) + " must be " + ShapeToString(weight_shape));
  }
  if (b.shape() != weight_shape) {
    throw ShapeError("lattice: weight B " + ShapeToString(b.shape()) + " must be " + ShapeToString(weight_shape));
  }
  LatticeOutputs out;
  out.p = Relu(Add(x, Mul(b, t)));
  out.q = Relu(Add(Mul(a, x), t));
  out.f = Add(out.p, out.q);
  return out;
}

void LerbParams::Visit(const std::string& prefix, ParamVisitor& v) {
  ctx_conv1.Visit(JoinName(prefix, "ctx.conv1"), v);
  ctx_bn1.Visit(JoinName(prefix, "ctx.bn1"), v);
  ctx_conv2.Visit(JoinName(prefix, "ctx.conv2"), v);
  ctx_bn2.Visit(JoinName(prefix, "ctx.bn2"), v);
  wlb_c.Visit(JoinName(prefix, "wlb_c"), v);
  spatial_conv.Visit(JoinName(prefix, "spatial.conv"), v);
  spatial_bn.Visit(JoinName(prefix, "spatial.bn"), v);
  wlb_s.Visit(JoinName(prefix, "wlb_s"), v);
}

LerbParams MakeLerb(std::int64_t channels, std::int64_t side_channels, std::array<int, 2> rates, Rng& rng) {
  LerbParams p;
  p.ctx_conv1 = MakeConv(channels, channels, 3, {1, rates[0], rates[0]}, false, rng);
  p.ctx_bn1 = MakeBatchNorm(channels);
  p.ctx_conv2 = MakeConv(channels, channels, 3, {1, rates[1], rates[1]}, false, rng);
  p.ctx_bn2 = MakeBatchNorm(channels);
  p.wlb_c = MakeWlb(channels, rng);
  p.spatial_conv = MakeConv(channels + side_channels, channels, 3, {1, 1, 1}, false, rng);
  p.spatial_bn = MakeBatchNorm(channels);
  p.wlb_s = MakeWlb(channels, rng);
  return p;
}

Var ContextualBlock(const LerbParams& params, const Var& x, bool training) {
  RequireChannels(x, params.channels(), "contextual module input");
  Var y = Relu(Forward(params.ctx_bn1, Forward(params.ctx_conv1, x), training));
  return Forward(params.ctx_bn2, Forward(params.ctx_conv2, y), training);
}

Var SpatialBlock(const LerbParams& params, const Var& f_c, const Var& m, bool training) {
  RequireChannels(f_c, params.channels(), "spatial module input F_c");
  RequireChannels(m, params.side_channels(), "spatial module input M");
  const Shape& a = f_c.shape();
  const Shape& b = m.shape();
  if (a[0] != b[0] || a[2] != b[2] || a[3] != b[3]) {
    throw ShapeError("spatial module: M " + ShapeToString(b) + " does not match F_c " + ShapeToString(a) +
                     " in batch/spatial size");
  }
  return Forward(params.spatial_bn, Forward(params.spatial_conv, ConcatChannels(f_c, m)), training);
}

Var ContextualModuleForward(const LerbParams& params, const Var& x, bool training) {
  Var cx = ContextualBlock(params, x, training);
  LatticeWeights w = WeightLearningForward(params.wlb_c, x);
  return LatticeCombine(x, cx, w.a, w.b).f;
}

Var SpatialModuleForward(const LerbParams& params, const Var& f_c, const Var& m, bool training) {
  Var s = SpatialBlock(params, f_c, m, training);
  LatticeWeights w = WeightLearningForward(params.wlb_s, f_c);
  // The spatial lattice swaps roles: B_s scales F_c and A_s scales S(.), i.e.
  // P_s = ReLU(B_s*F_c + S), Q_s = ReLU(F_c + A_s*S). The sum is the generic
  // combine with the weights exchanged.
  return LatticeCombine(f_c, s, /*a=*/w.b, /*b=*/w.a).f;
}

Var LerbForward(const LerbParams& params, const Var& x, const Var& m, bool training) {
  Var f_c = ContextualModuleForward(params, x, training);
  Var f_s = SpatialModuleForward(params, f_c, m, training);
  return ConcatChannels(f_c, f_s);
}

}  // namespace dmanet
