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
#ifndef DMANET_DMA_NET_H_
#define DMANET_DMA_NET_H_

#include <array>
#include <string>

#include "dmanet/encoder.h"
#include "dmanet/feature_transform.h"
#include "dmanet/global_context.h"
#include "dmanet/lattice.h"
#include "dmanet/model_config.h"

namespace dmanet {

enum BranchIndex { kLowBranch = 0, kMidBranch = 1, kHighBranch = 2 };

// One decoder branch: two reducing CBRs, the LERB fed by the f4 adapter, and
// the post-LERB CBR (2C -> C).
struct BranchParams {
  CbrParams cbr1;       // encoder width -> C
  CbrParams cbr2;       // C -> C
  CbrParams m_adapter;  // applied to avg-pooled f4, C_m -> C_m
  LerbParams lerb;
  CbrParams post;       // 2C -> C
  int pool_factor = 2;  // f4 grid / branch grid

  void Visit(const std::string& prefix, ParamVisitor& v);
};

struct DmaNetParams {
  ModelConfig config;
  EncoderParams encoder;
  std::array<BranchParams, 3> branches;  // indexed by BranchIndex
  FtbParams ftb_hb_mb;
  FtbParams ftb_mb_lb;
  GcbParams gcb;
  ConvLayer head_principal;
  ConvLayer head_mid;
  ConvLayer head_high;

  void Visit(const std::string& prefix, ParamVisitor& v);
};

// Logits at full input resolution, (N, K, H, W) each.
struct ModelOutputs {
  Var principal;
  Var aux_mid;   // undefined when auxiliary heads are skipped
  Var aux_high;  // undefined when auxiliary heads are skipped
};

// Intermediate features of one forward pass, for inspection.
struct DmaTrace {
  EncoderTaps taps;
  std::array<Var, 3> adapters;  // M per branch
  std::array<Var, 3> features;  // post-LERB CBR output per branch
  Var gcb;
  Var hb_agg;
  Var mb_agg;
  Var lb_out;
};

struct ForwardOptions {
  bool training = false;
  bool with_aux = true;
  DmaTrace* trace = nullptr;
};

DmaNetParams BuildDmaNet(const ModelConfig& config, std::uint64_t seed);

ModelOutputs DmaForward(const DmaNetParams& params, const Var& images, const ForwardOptions& options);
inline ModelOutputs DmaForward(const DmaNetParams& params, const Var& images, bool training) {
  return DmaForward(params, images, ForwardOptions{training, true, nullptr});
}

// Per-pixel argmax over channels; ties resolve to the smaller class id.
LabelMap ArgmaxLabels(const Tensor& logits);

// Inference-mode argmax of the principal head.
LabelMap Predict(const DmaNetParams& params, const Tensor& images);

}  // namespace dmanet

#endif  // DMANET_DMA_NET_H_
