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
#ifndef DMANET_MODEL_CONFIG_H_
#define DMANET_MODEL_CONFIG_H_

#include <array>
#include <cstdint>

namespace dmanet {

// Single source of truth for graph construction.
struct ModelConfig {
  int num_classes = 19;
  int branch_width = 128;
  std::array<int, 2> atrous_rates{2, 4};
  double lambda = 1.0;
  // Uniform width shrink for toy-scale models; 1 keeps canonical widths.
  int width_divisor = 1;

  // Throws ConfigError on any violated invariant.
  void Validate() const;

  // Encoder stage widths after applying width_divisor: (64, 128, 256, 512) / d.
  std::array<std::int64_t, 4> EncoderWidths() const;
  std::int64_t DecoderWidth() const { return branch_width / width_divisor; }

  static constexpr int kInputMultiple = 32;
};

}  // namespace dmanet

#endif  // DMANET_MODEL_CONFIG_H_
