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
#ifndef DMANET_ENCODER_H_
#define DMANET_ENCODER_H_

#include <array>
#include <string>
#include <vector>

#include "dmanet/layers.h"
#include "dmanet/model_config.h"

namespace dmanet {

// Residual basic block: conv3x3-BN-ReLU-conv3x3-BN plus (projected) shortcut.
struct BasicBlock {
  ConvLayer conv1;
  BatchNormLayer bn1;
  ConvLayer conv2;
  BatchNormLayer bn2;
  bool has_downsample = false;
  ConvLayer down_conv;
  BatchNormLayer down_bn;

  void Visit(const std::string& prefix, ParamVisitor& v);
};

struct EncoderParams {
  ConvLayer stem_conv;  // 7x7, stride 2, padding 3
  BatchNormLayer stem_bn;
  // sub-networks 1..4, two blocks each
  std::array<std::array<BasicBlock, 2>, 4> subs;

  std::array<std::int64_t, 4> Widths() const;
  void Visit(const std::string& prefix, ParamVisitor& v);
};

// Outputs of sub-networks 1..4 at 1/4, 1/8, 1/16 and 1/32 of the input.
struct EncoderTaps {
  Var f4, f8, f16, f32;
};

EncoderParams BuildEncoder(const ModelConfig& config, std::uint64_t seed);
EncoderParams BuildEncoder(const ModelConfig& config, Rng& rng);

// `images` must be (N, 3, H, W) with H and W multiples of 32.
EncoderTaps EncoderForward(const EncoderParams& params, const Var& images, bool training);

// Throws ShapeError naming the offending axis if `images` is not a valid
// network input.
void ValidateInputImages(const Tensor& images);

struct LoadReport {
  std::vector<std::string> loaded;
  std::vector<std::string> unknown_keys;
};

// Overwrites every encoder array with the same-named array of `path`.
// Missing names throw ValidationError naming the group; shape mismatches
// throw ShapeError with both shapes; unreadable files throw IoError.
LoadReport LoadPretrained(EncoderParams& params, const std::string& path);

}  // namespace dmanet

#endif  // DMANET_ENCODER_H_
