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
#ifndef DMANET_GLOBAL_CONTEXT_H_
#define DMANET_GLOBAL_CONTEXT_H_

#include <string>

#include "dmanet/lattice.h"

namespace dmanet {

// Global average pool of the 1/32 tap, a 1x1 Conv-BN-ReLU, then broadcast
// back to the tap's grid. A 3x3 kernel on a 1x1 map only ever touches its
// centre tap, so the 1x1 kernel computes the same function.
struct GcbParams {
  CbrParams cbr;

  void Visit(const std::string& prefix, ParamVisitor& v) { cbr.Visit(JoinName(prefix, "cbr"), v); }
};

GcbParams MakeGcb(std::int64_t c_in, std::int64_t c_out, Rng& rng);
Var GcbForward(const GcbParams& params, const Var& f32, bool training);

}  // namespace dmanet

#endif  // DMANET_GLOBAL_CONTEXT_H_
