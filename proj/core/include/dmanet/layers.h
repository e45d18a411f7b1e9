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
#ifndef DMANET_LAYERS_H_
#define DMANET_LAYERS_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dmanet/ops.h"

namespace dmanet {

using Rng = std::mt19937_64;

// Whether the optimizer applies weight decay to a parameter.
enum class Decay { kApply, kExempt };

// Walks every named parameter and persistent buffer of a parameter group.
class ParamVisitor {
 public:
  virtual ~ParamVisitor() = default;
  virtual void Param(const std::string& name, Var& var, Decay decay) = 0;
  virtual void Buffer(const std::string& name, Tensor& tensor) = 0;
};

struct NamedParam {
  std::string name;
  Var var;
  Decay decay = Decay::kApply;
};

struct NamedBuffer {
  std::string name;
  Tensor* tensor = nullptr;
};

class ParamCollector : public ParamVisitor {
 public:
  void Param(const std::string& name, Var& var, Decay decay) override { params.push_back({name, var, decay}); }
  void Buffer(const std::string& name, Tensor& tensor) override { buffers.push_back({name, &tensor}); }

  std::vector<NamedParam> params;
  std::vector<NamedBuffer> buffers;
};

template <typename Group>
ParamCollector CollectParams(Group& group, const std::string& prefix = "") {
  ParamCollector collector;
  group.Visit(prefix, collector);
  return collector;
}

inline std::string JoinName(const std::string& prefix, const std::string& leaf) {
  return prefix.empty() ? leaf : prefix + "." + leaf;
}

// Kaiming-normal tensor: N(0, 2 / fan_in).
Tensor KaimingNormal(const Shape& shape, std::int64_t fan_in, Rng& rng);

struct ConvLayer {
  Var weight;  // (C_out, C_in, k, k)
  Var bias;    // (C_out) or undefined
  ConvGeometry geometry;
  Decay bias_decay = Decay::kApply;

  std::int64_t in_channels() const { return weight.shape()[1]; }
  std::int64_t out_channels() const { return weight.shape()[0]; }
  std::int64_t kernel() const { return weight.shape()[2]; }

  void Visit(const std::string& prefix, ParamVisitor& v);
};

ConvLayer MakeConv(std::int64_t c_in, std::int64_t c_out, int kernel, ConvGeometry geometry, bool with_bias, Rng& rng);
Var Forward(const ConvLayer& conv, const Var& x);

struct BatchNormLayer {
  Var gamma;
  Var beta;
  // Updated in training mode only.
  mutable Tensor running_mean;
  mutable Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  std::int64_t channels() const { return gamma.shape()[0]; }
  void Visit(const std::string& prefix, ParamVisitor& v);
};

BatchNormLayer MakeBatchNorm(std::int64_t channels);
Var Forward(const BatchNormLayer& bn, const Var& x, bool training);

}  // namespace dmanet

#endif  // DMANET_LAYERS_H_
