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
#ifndef DMANET_OPS_H_
#define DMANET_OPS_H_

#include <cstdint>
#include <string>

#include "dmanet/autograd.h"

namespace dmanet {

// Differentiable primitives over NCHW feature maps. Every op validates its
// operand shapes and throws ShapeError naming the offending operand.

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

// `weight` is (C_out, C_in, k, k); `bias` may be undefined or (C_out).
Var Conv2d(const Var& x, const Var& weight, const Var& bias, ConvGeometry geometry);

// Batch normalization over (N, H, W) per channel. In training mode batch
// statistics are used and the running buffers are updated in place.
Var BatchNorm2d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                Tensor& running_var, bool training, double momentum, double eps);

Var Relu(const Var& x);
Var LeakyRelu(const Var& x, double negative_slope);
Var Sigmoid(const Var& x);

// Element-wise binary ops with size-1 broadcasting on any axis.
Var Add(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Scale(const Var& x, double factor);

Var ConcatChannels(const Var& a, const Var& b);
Var SliceChannels(const Var& x, std::int64_t begin, std::int64_t count);

Var MaxPool2d(const Var& x, int kernel, int stride, int padding);
// Non-overlapping average pooling with kernel == stride == factor.
Var AvgPool2d(const Var& x, int factor);
Var GlobalAvgPool(const Var& x);

// Bilinear resize, align_corners = false.
Var UpsampleBilinear(const Var& x, std::int64_t out_h, std::int64_t out_w);

// Softmax along the channel axis.
Var SoftmaxChannels(const Var& x);

// sum(x * weights) as a (1,1,1,1) scalar; `weights` is a constant.
Var WeightedSum(const Var& x, const Tensor& weights);

// Optional per-thread sink for the cost of each executed primitive, using
// the same cost table as the analytic profiler.
class OpCostSink {
 public:
  virtual ~OpCostSink() = default;
  virtual void Record(const std::string& op, std::int64_t flops, std::int64_t macs) = 0;
};

class ScopedOpCostSink {
 public:
  explicit ScopedOpCostSink(OpCostSink* sink);
  ~ScopedOpCostSink();
  ScopedOpCostSink(const ScopedOpCostSink&) = delete;
  ScopedOpCostSink& operator=(const ScopedOpCostSink&) = delete;

 private:
  OpCostSink* previous_;
};

// Per-element costs (flops per output element unless noted).
namespace cost {
inline constexpr std::int64_t kBatchNorm = 2;
inline constexpr std::int64_t kRelu = 1;
inline constexpr std::int64_t kLeakyRelu = 1;
inline constexpr std::int64_t kSigmoid = 2;
inline constexpr std::int64_t kAdd = 1;
inline constexpr std::int64_t kMul = 1;
inline constexpr std::int64_t kSoftmax = 3;
inline constexpr std::int64_t kBilinear = 8;
// Pooling: one op per window tap (max) or per input element (average).
}  // namespace cost

}  // namespace dmanet

#endif  // DMANET_OPS_H_
