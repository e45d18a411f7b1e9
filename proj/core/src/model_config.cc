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
#include "dmanet/model_config.h"

#include <string>

#include "dmanet/tensor.h"

namespace dmanet {

void ModelConfig::Validate() const {
  if (num_classes < 2 || num_classes > 255) {
    throw ConfigError("model.num_classes must be in [2, 255], got " + std::to_string(num_classes));
  }
  if (width_divisor < 1) throw ConfigError("model.width_divisor must be >= 1");
  if (branch_width < 1 || branch_width % width_divisor != 0) {
    throw ConfigError("model.branch_width (" + std::to_string(branch_width) + ") must be divisible by width_divisor (" +
                      std::to_string(width_divisor) + ")");
  }
  if (64 % width_divisor != 0) throw ConfigError("model.width_divisor must divide 64");
  if (atrous_rates[0] < 1 || atrous_rates[1] < 1) throw ConfigError("model.atrous_rates must be >= 1");
  if (!(lambda >= 0.0)) throw ConfigError("model.lambda must be >= 0");
}

std::array<std::int64_t, 4> ModelConfig::EncoderWidths() const {
  return {64 / width_divisor, 128 / width_divisor, 256 / width_divisor, 512 / width_divisor};
}

}  // namespace dmanet
