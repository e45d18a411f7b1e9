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
#ifndef DMANET_PROFILER_H_
#define DMANET_PROFILER_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmanet/dma_net.h"

namespace dmanet {

// Cost convention: one FLOP per add or multiply, so a multiply-add is 2.
//   conv2d             2 * MACs, plus 1 per output element when biased
//   batch_norm         2 per element
//   relu, leaky_relu   1 per element
//   sigmoid            2 per element
//   add, mul           1 per output element
//   softmax            3 per element
//   upsample_bilinear  8 per output element
//   max_pool           k*k per output element
//   avg_pool, gap      1 per input element
//   concat, slice      0
inline constexpr char kCostTableDescription[] =
    "conv2d=2*MAC(+1/out if bias) batch_norm=2/elem relu=1/elem leaky_relu=1/elem sigmoid=2/elem add=1/elem "
    "mul=1/elem softmax=3/elem upsample_bilinear=8/out max_pool=k*k/out avg_pool=1/in global_avg_pool=1/in";

struct ProfileRow {
  std::string name;
  std::int64_t params = 0;
  std::int64_t flops = 0;
  std::int64_t macs = 0;
};

struct LatencyStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double fps = 0.0;
  int warmup = 0;
  int iters = 0;
  std::int64_t input_h = 0;
  std::int64_t input_w = 0;
  std::string hardware;
};

struct ProfileReport {
  std::int64_t input_h = 0;
  std::int64_t input_w = 0;
  std::vector<ProfileRow> rows;
  std::int64_t total_params = 0;
  std::int64_t total_flops = 0;
  std::int64_t total_macs = 0;
  std::optional<LatencyStats> latency;
};

// Per-layer parameter counts by enumerating every array of `model`. A layer is
// a parameter name without its final component.
std::vector<ProfileRow> CountParams(DmaNetParams& model);

// Analytic per-layer params and FLOPs for one image of size h x w, derived
// from the configuration alone. Auxiliary heads contribute FLOPs only when
// `with_aux`; their parameters are always listed.
ProfileReport CountFlops(const ModelConfig& config, std::int64_t h, std::int64_t w, bool with_aux = true);

// Per-op totals recorded while running an actual forward pass.
struct OpCostTally : OpCostSink {
  void Record(const std::string& op, std::int64_t flops, std::int64_t macs) override;
  std::map<std::string, std::int64_t> flops_by_op;
  std::int64_t flops = 0;
  std::int64_t macs = 0;
};

// Runs one inference-mode forward on a single zero image and tallies it.
OpCostTally MeasureForwardCost(const DmaNetParams& model, std::int64_t h, std::int64_t w, bool with_aux = true);

// Times inference-mode forwards (batch 1, no auxiliary heads). Throws
// ConfigError unless iters >= 1 and warmup >= 0.
LatencyStats BenchmarkLatency(const DmaNetParams& model, std::int64_t h, std::int64_t w, int warmup, int iters);

// CPU model string and logical core count.
std::string HardwareDescription();

// Human-readable report: header with the cost table, one row per layer,
// totals and the optional latency line.
std::string FormatProfileReport(const ProfileReport& report);
// One `key=value` per line.
std::string FormatProfileKeyValues(const ProfileReport& report);

}  // namespace dmanet

#endif  // DMANET_PROFILER_H_
