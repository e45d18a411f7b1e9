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
#include "dmanet/global_context.h"

namespace dmanet {

GcbParams MakeGcb(std::int64_t c_in, std::int64_t c_out, Rng& rng) { return {MakeCbr(c_in, c_out, 1, 1, rng)}; }

Var GcbForward(const GcbParams& params, const Var& f32, bool training) {
  RequireFeatureMap(f32.value(), "gcb input");
  if (f32.shape()[1] != params.cbr.conv.in_channels()) {
    throw ShapeError("gcb: expected " + std::to_string(params.cbr.conv.in_channels()) + " input channels, got " +
                     ShapeToString(f32.shape()));
  }
  Var pooled = CbrForward(params.cbr, GlobalAvgPool(f32), training);
  // Bilinear resize of a single sample is a constant broadcast.
  return UpsampleBilinear(pooled, f32.shape()[2], f32.shape()[3]);
}

}  // namespace dmanet
