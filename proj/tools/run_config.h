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
#ifndef DMANET_TOOLS_RUN_CONFIG_H_
#define DMANET_TOOLS_RUN_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "dmanet/data.h"
#include "dmanet/model_config.h"
#include "dmanet/trainer.h"

namespace dmanet::tools {

// Everything a command needs, resolved from one config file plus overrides.
//
// File format: one `key = value` per line with dotted keys such as
// `train.base_lr = 0.01`. A `[section]` line prefixes the keys that follow
// with `section.`. `#` starts a comment. Lists are comma separated. Unknown
// keys and malformed values are errors.
struct RunConfig {
  ModelConfig model;
  std::uint64_t model_seed = 1;
  std::string pretrained;  // optional encoder weights

  TrainConfig train;
  std::int64_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::vector<double> lambda_sweep;   // empty: single run with train.lambda

  AugConfig aug;
  Normalization norm;

  std::string data_source = "toy";  // toy | files
  std::string data_layout = "generic";
  std::string data_root;
  std::string train_split = "train";
  std::string val_split = "val";
  ToySpec toy;  // toy.num_classes always follows model.num_classes
  std::uint64_t toy_seed = 0;

  std::string output_dir = "runs/default";

  std::int64_t profile_h = 1024;
  std::int64_t profile_w = 2048;
  bool profile_aux = false;
  int latency_warmup = 3;
  int latency_iters = 10;

  std::string palette = "auto";  // auto | cityscapes | toy
  bool predict_composite = false;

  // Throws ConfigError on any violated invariant or missing path.
  void Validate() const;
};

// Parses `text`; `origin` names the source in error messages.
RunConfig ParseRunConfig(const std::string& text, const std::string& origin = "<config>");
RunConfig LoadRunConfig(const std::string& path);

// Applies one `key=value` override.
void ApplyOverride(RunConfig& cfg, const std::string& assignment);

// Every key with its resolved value, in a form ParseRunConfig accepts.
std::string FormatRunConfig(const RunConfig& cfg);

// Names of every accepted key.
std::vector<std::string> RunConfigKeys();

// Environment variable that, when set, replaces output.dir.
inline constexpr char kOutputRootEnv[] = "DMANET_OUTPUT_ROOT";
void ApplyEnvironment(RunConfig& cfg);

}  // namespace dmanet::tools

#endif  // DMANET_TOOLS_RUN_CONFIG_H_
