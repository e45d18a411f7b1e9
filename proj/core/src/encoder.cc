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
#include "dmanet/encoder.h"

#include "dmanet/weight_archive.h"

namespace dmanet {
namespace {

BasicBlock MakeBlock(std::int64_t c_in, std::int64_t c_out, int stride, Rng& rng) {
  BasicBlock b;
  b.conv1 = MakeConv(c_in, c_out, 3, {stride, 1, 1}, false, rng);
  b.bn1 = MakeBatchNorm(c_out);
  b.conv2 = MakeConv(c_out, c_out, 3, {1, 1, 1}, false, rng);
  b.bn2 = MakeBatchNorm(c_out);
  if (stride != 1 || c_in != c_out) {
    b.has_downsample = true;
    b.down_conv = MakeConv(c_in, c_out, 1, {stride, 0, 1}, false, rng);
    b.down_bn = MakeBatchNorm(c_out);
  }
  return b;
}

Var BlockForward(const BasicBlock& b, const Var& x, bool training) {
  Var y = Relu(Forward(b.bn1, Forward(b.conv1, x), training));
  y = Forward(b.bn2, Forward(b.conv2, y), training);
  Var shortcut = b.has_downsample ? Forward(b.down_bn, Forward(b.down_conv, x), training) : x;
  return Relu(Add(y, shortcut));
}

}  // namespace

void BasicBlock::Visit(const std::string& prefix, ParamVisitor& v) {
  conv1.Visit(JoinName(prefix, "conv1"), v);
  bn1.Visit(JoinName(prefix, "bn1"), v);
  conv2.Visit(JoinName(prefix, "conv2"), v);
  bn2.Visit(JoinName(prefix, "bn2"), v);
  if (has_downsample) {
    down_conv.Visit(JoinName(prefix, "downsample.conv"), v);
    down_bn.Visit(JoinName(prefix, "downsample.bn"), v);
  }
}

std::array<std::int64_t, 4> EncoderParams::Widths() const {
  return {subs[0][1].conv2.out_channels(), subs[1][1].conv2.out_channels(), subs[2][1].conv2.out_channels(),
          subs[3][1].conv2.out_channels()};
}

void EncoderParams::Visit(const std::string& prefix, ParamVisitor& v) {
  stem_conv.Visit(JoinName(prefix, "stem.conv"), v);
  stem_bn.Visit(JoinName(prefix, "stem.bn"), v);
  for (std::size_t s = 0; s < subs.size(); ++s) {
    for (std::size_t b = 0; b < 2; ++b) {
      subs[s][b].Visit(JoinName(prefix, "sub" + std::to_string(s + 1) + ".block" + std::to_string(b + 1)), v);
    }
  }
}

EncoderParams BuildEncoder(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  return BuildEncoder(config, rng);
}

EncoderParams BuildEncoder(const ModelConfig& config, Rng& rng) {
  config.Validate();
  const auto widths = config.EncoderWidths();
  EncoderParams p;
  p.stem_conv = MakeConv(3, widths[0], 7, {2, 3, 1}, false, rng);
  p.stem_bn = MakeBatchNorm(widths[0]);
  constexpr std::array<int, 4> kStrides{1, 2, 2, 2};
  std::int64_t c_in = widths[0];
  for (std::size_t s = 0; s < 4; ++s) {
    p.subs[s][0] = MakeBlock(c_in, widths[s], kStrides[s], rng);
    p.subs[s][1] = MakeBlock(widths[s], widths[s], 1, rng);
    c_in = widths[s];
  }
  return p;
}

void ValidateInputImages(const Tensor& images) {
  RequireFeatureMap(images, "input images");
  if (images.dim(1) != 3) {
    throw ShapeError("input images: channel axis must be 3, got " + std::to_string(images.dim(1)));
  }
  constexpr int kMultiple = ModelConfig::kInputMultiple;
  if (images.dim(2) % kMultiple != 0) {
    throw ShapeError("input images: height " + std::to_string(images.dim(2)) + " is not divisible by 32");
  }
  if (images.dim(3) % kMultiple != 0) {
    throw ShapeError("input images: width " + std::to_string(images.dim(3)) + " is not divisible by 32");
  }
}

EncoderTaps EncoderForward(const EncoderParams& params, const Var& images, bool training) {
  ValidateInputImages(images.value());
  Var x = Relu(Forward(params.stem_bn, Forward(params.stem_conv, images), training));
  x = MaxPool2d(x, 3, 2, 1);
  std::array<Var, 4> taps;
  for (std::size_t s = 0; s < 4; ++s) {
    x = BlockForward(params.subs[s][0], x, training);
    x = BlockForward(params.subs[s][1], x, training);
    taps[s] = x;
  }
  return {taps[0], taps[1], taps[2], taps[3]};
}

LoadReport LoadPretrained(EncoderParams& params, const std::string& path) {
  WeightArchive archive = ReadArchive(path);
  LoadReport report;
  report.unknown_keys = ImportArchive(params, archive);
  for (const auto& p : CollectParams(params).params) report.loaded.push_back(p.name);
  return report;
}

}  // namespace dmanet
