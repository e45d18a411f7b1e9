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
#include "dmanet/dma_net.h"

namespace dmanet {
namespace {

constexpr std::array<const char*, 3> kBranchNames{"lb", "mb", "hb"};

BranchParams MakeBranch(std::int64_t c_enc, std::int64_t width, std::int64_t c_m, int pool_factor,
                        const ModelConfig& config, Rng& rng) {
  BranchParams b;
  b.cbr1 = MakeCbr(c_enc, width, 3, 1, rng);
  b.cbr2 = MakeCbr(width, width, 3, 1, rng);
  b.m_adapter = MakeCbr(c_m, c_m, 3, 1, rng);
  b.lerb = MakeLerb(width, c_m, config.atrous_rates, rng);
  b.post = MakeCbr(2 * width, width, 3, 1, rng);
  b.pool_factor = pool_factor;
  return b;
}

Var BranchForward(const BranchParams& b, const Var& tap, const Var& f4, bool training, Var* adapter_out) {
  Var z = CbrForward(b.cbr2, CbrForward(b.cbr1, tap, training), training);
  Var m = CbrForward(b.m_adapter, AvgPool2d(f4, b.pool_factor), training);
  if (m.shape()[2] != z.shape()[2] || m.shape()[3] != z.shape()[3]) {
    throw ShapeError("branch: adapted f4 " + ShapeToString(m.shape()) + " does not match branch feature " +
                     ShapeToString(z.shape()));
  }
  if (adapter_out) *adapter_out = m;
  return CbrForward(b.post, LerbForward(b.lerb, z, m, training), training);
}

Var Upsample2x(const Var& x) { return UpsampleBilinear(x, x.shape()[2] * 2, x.shape()[3] * 2); }

}  // namespace

void BranchParams::Visit(const std::string& prefix, ParamVisitor& v) {
  cbr1.Visit(JoinName(prefix, "cbr1"), v);
  cbr2.Visit(JoinName(prefix, "cbr2"), v);
  m_adapter.Visit(JoinName(prefix, "m_adapter"), v);
  lerb.Visit(JoinName(prefix, "lerb"), v);
  post.Visit(JoinName(prefix, "post"), v);
}

void DmaNetParams::Visit(const std::string& prefix, ParamVisitor& v) {
  encoder.Visit(prefix, v);
  for (std::size_t i = 0; i < branches.size(); ++i) branches[i].Visit(JoinName(prefix, kBranchNames[i]), v);
  ftb_hb_mb.Visit(JoinName(prefix, "ftb.hb_mb"), v);
  ftb_mb_lb.Visit(JoinName(prefix, "ftb.mb_lb"), v);
  gcb.Visit(JoinName(prefix, "gcb"), v);
  head_principal.Visit(JoinName(prefix, "heads.principal"), v);
  head_mid.Visit(JoinName(prefix, "heads.mid"), v);
  head_high.Visit(JoinName(prefix, "heads.high"), v);
}

DmaNetParams BuildDmaNet(const ModelConfig& config, std::uint64_t seed) {
  config.Validate();
  Rng rng(seed);
  DmaNetParams p;
  p.config = config;
  p.encoder = BuildEncoder(config, rng);
  const auto widths = config.EncoderWidths();
  const std::int64_t c = config.DecoderWidth();
  const std::int64_t c_m = widths[0];
  p.branches[kLowBranch] = MakeBranch(widths[1], c, c_m, 2, config, rng);
  p.branches[kMidBranch] = MakeBranch(widths[2], c, c_m, 4, config, rng);
  p.branches[kHighBranch] = MakeBranch(widths[3], c, c_m, 8, config, rng);
  p.ftb_hb_mb = MakeFtb(c, c, rng);
  p.ftb_mb_lb = MakeFtb(c, c, rng);
  p.gcb = MakeGcb(widths[3], c, rng);
  p.head_principal = MakeConv(c, config.num_classes, 1, {}, true, rng);
  p.head_mid = MakeConv(c, config.num_classes, 1, {}, true, rng);
  p.head_high = MakeConv(c, config.num_classes, 1, {}, true, rng);
  return p;
}

ModelOutputs DmaForward(const DmaNetParams& params, const Var& images, const ForwardOptions& options) {
  const bool training = options.training;
  const std::int64_t h = images.shape()[2];
  const std::int64_t w = images.shape()[3];
  EncoderTaps taps = EncoderForward(params.encoder, images, training);

  std::array<Var, 3> adapters;
  const std::array<Var, 3> branch_taps{taps.f8, taps.f16, taps.f32};
  std::array<Var, 3> features;
  for (std::size_t i = 0; i < 3; ++i) {
    features[i] = BranchForward(params.branches[i], branch_taps[i], taps.f4, training, &adapters[i]);
  }
  Var gcb = GcbForward(params.gcb, taps.f32, training);
  Var hb_agg = Add(features[kHighBranch], gcb);
  Var mb_agg = Add(features[kMidBranch], Upsample2x(FtbForward(params.ftb_hb_mb, hb_agg, training)));
  Var lb_out = Add(features[kLowBranch], Upsample2x(FtbForward(params.ftb_mb_lb, mb_agg, training)));

  ModelOutputs out;
  out.principal = UpsampleBilinear(Forward(params.head_principal, lb_out), h, w);
  if (options.with_aux) {
    out.aux_mid = UpsampleBilinear(Forward(params.head_mid, mb_agg), h, w);
    out.aux_high = UpsampleBilinear(Forward(params.head_high, hb_agg), h, w);
  }
  if (options.trace) {
    *options.trace = DmaTrace{taps, adapters, features, gcb, hb_agg, mb_agg, lb_out};
  }
  return out;
}

LabelMap ArgmaxLabels(const Tensor& logits) {
  RequireFeatureMap(logits, "argmax input");
  const std::int64_t n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  if (k > 255) throw ShapeError("argmax: at most 255 classes are representable");
  LabelMap labels(n, h, w);
  const std::int64_t plane = h * w;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < plane; ++j) {
      const double* base = logits.data() + i * k * plane + j;
      std::int64_t best = 0;
      for (std::int64_t c = 1; c < k; ++c) {
        if (base[c * plane] > base[best * plane]) best = c;
      }
      labels.data[static_cast<std::size_t>(i * plane + j)] = static_cast<std::uint8_t>(best);
    }
  }
  return labels;
}

LabelMap Predict(const DmaNetParams& params, const Tensor& images) {
  NoGradGuard no_grad;
  ModelOutputs out = DmaForward(params, Var::Constant(images), ForwardOptions{false, false, nullptr});
  return ArgmaxLabels(out.principal.value());
}

}  // namespace dmanet
