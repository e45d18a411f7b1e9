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
#ifndef DMANET_TOOLS_COMMANDS_H_
#define DMANET_TOOLS_COMMANDS_H_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dmanet/data.h"
#include "dmanet/dma_net.h"
#include "run_config.h"

namespace dmanet::tools {

// File names inside an output directory.
inline constexpr char kResolvedConfigFile[] = "config.resolved";
inline constexpr char kHistoryFile[] = "history.csv";
inline constexpr char kCheckpointFile[] = "checkpoint.dmaw";
inline constexpr char kWeightsFile[] = "weights.dmaw";
inline constexpr char kReportFile[] = "report.txt";
inline constexpr char kSweepSummaryFile[] = "sweep.txt";
inline constexpr char kProfileFile[] = "profile.txt";
inline constexpr char kProfileKvFile[] = "profile.kv";

struct TrainOptions {
  std::string resume;                 // checkpoint to continue from
  std::vector<double> lambda_sweep;   // overrides train.lambda_sweep when non-empty
  std::int64_t stop_after = -1;       // halt after this many iterations of this invocation
};

struct ProfileOptions {
  std::optional<std::pair<std::int64_t, std::int64_t>> input_size;
  bool latency = false;
};

// Each command returns a process exit status and logs progress to `log`.
int CmdTrain(const RunConfig& cfg, const TrainOptions& options, std::ostream& log);
int CmdEval(const RunConfig& cfg, const std::string& checkpoint, const std::string& split, std::ostream& log);
int CmdProfile(const RunConfig& cfg, const ProfileOptions& options, std::ostream& log);
int CmdPredict(const RunConfig& cfg, const std::string& checkpoint, const std::vector<std::string>& images,
               const std::string& out_dir, std::ostream& log);

// Output directory of one sweep member.
std::string LambdaRunDir(const std::string& output_dir, double lambda);

// The dataset named by `split`; the toy source ignores the split name.
std::unique_ptr<Dataset> OpenDataset(const RunConfig& cfg, const std::string& split);

// Pads bottom/right by reflection to the next multiple of 32, runs the
// principal head and crops the labels back to the input size.
LabelMap PredictImage(const DmaNetParams& model, const Tensor& chw, const Normalization& norm);

// Reflection-pads a (3, H, W) image to (3, out_h, out_w).
Tensor ReflectPad(const Tensor& chw, std::int64_t out_h, std::int64_t out_w);

Palette ChoosePalette(const RunConfig& cfg);

// Parses "HxW".
std::pair<std::int64_t, std::int64_t> ParseInputSize(const std::string& text);
// Parses "v1,v2,...".
std::vector<double> ParseLambdaList(const std::string& text);

}  // namespace dmanet::tools

#endif  // DMANET_TOOLS_COMMANDS_H_
