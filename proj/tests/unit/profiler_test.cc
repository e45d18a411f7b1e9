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
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "dmanet/profiler.h"
#include "test_support.h"

namespace dmanet {
namespace {

ModelConfig ToyConfig() {
  ModelConfig cfg;
  cfg.num_classes = 4;
  cfg.width_divisor = 8;
  return cfg;
}

TEST(ParamCountTest, SingleConvolutionLayer) {
  Rng rng(1);
  ConvLayer conv = MakeConv(64, 64, 3, {1, 1, 1}, true, rng);
  std::int64_t n = 0;
  for (const auto& p : CollectParams(conv).params) n += p.var.value().size();
  EXPECT_EQ(n, 36928);
}

TEST(ParamCountTest, AnalyticTableMatchesEnumeration) {
  for (const ModelConfig& cfg : {ToyConfig(), ModelConfig{}}) {
    DmaNetParams net = BuildDmaNet(cfg, 1);
    std::map<std::string, std::int64_t> enumerated;
    for (const auto& row : CountParams(net)) enumerated[row.name] = row.params;
    const ProfileReport report = CountFlops(cfg, 64, 64);
    std::map<std::string, std::int64_t> analytic;
    for (const auto& row : report.rows) {
      if (row.params > 0) analytic[row.name] = row.params;
    }
    EXPECT_EQ(analytic, enumerated);
    std::int64_t total = 0;
    for (const auto& [name, n] : enumerated) total += n;
    EXPECT_EQ(report.total_params, total);
  }
}

TEST(FlopCountTest, AnalyticWalkEqualsInstrumentedForward) {
  const DmaNetParams net = BuildDmaNet(ToyConfig(), 2);
  for (bool aux : {false, true}) {
    for (auto [h, w] : {std::pair{64, 64}, std::pair{96, 160}}) {
      const ProfileReport report = CountFlops(ToyConfig(), h, w, aux);
      const OpCostTally tally = MeasureForwardCost(net, h, w, aux);
      EXPECT_EQ(report.total_flops, tally.flops) << h << "x" << w << " aux " << aux;
      EXPECT_EQ(report.total_macs, tally.macs) << h << "x" << w << " aux " << aux;
    }
  }
}

TEST(FlopCountTest, ScalesWithPixelCount) {
  const ModelConfig cfg;
  const double full = static_cast<double>(CountFlops(cfg, 1024, 2048, false).total_flops);
  const double crop = static_cast<double>(CountFlops(cfg, 768, 1536, false).total_flops);
  EXPECT_NEAR(crop / full, 0.5625, 0.5625 * 0.01);
}

TEST(FlopCountTest, AffineInPixelCount) {
  // The only size-independent work is on pooled 1x1 maps, so FLOPs are
  // exactly alpha * pixels + beta.
  const ModelConfig cfg = ToyConfig();
  const std::int64_t sizes[3][2] = {{64, 64}, {128, 96}, {256, 320}};
  double px[3], fl[3];
  for (int i = 0; i < 3; ++i) {
    px[i] = static_cast<double>(sizes[i][0] * sizes[i][1]);
    fl[i] = static_cast<double>(CountFlops(cfg, sizes[i][0], sizes[i][1]).total_flops);
  }
  const double alpha = (fl[1] - fl[0]) / (px[1] - px[0]);
  const double beta = fl[0] - alpha * px[0];
  EXPECT_NEAR(alpha * px[2] + beta, fl[2], 1e-9 * fl[2]);
  EXPECT_GT(alpha, 0.0);
}

TEST(FlopCountTest, AuxHeadsAddWork) {
  const ProfileReport with = CountFlops(ToyConfig(), 64, 64, true), without = CountFlops(ToyConfig(), 64, 64, false);
  EXPECT_GT(with.total_flops, without.total_flops);
  EXPECT_EQ(with.total_params, without.total_params);
  EXPECT_THROW(CountFlops(ToyConfig(), 60, 64), ShapeError);
}

TEST(LatencyTest, SingleIterationHasZeroSpread) {
  const DmaNetParams net = BuildDmaNet(ToyConfig(), 3);
  const LatencyStats s = BenchmarkLatency(net, 64, 64, 0, 1);
  EXPECT_EQ(s.std_ms, 0.0);
  EXPECT_GT(s.mean_ms, 0.0);
  EXPECT_NEAR(s.fps * s.mean_ms, 1000.0, 1e-9);
  EXPECT_EQ(s.iters, 1);
  EXPECT_FALSE(s.hardware.empty());
  EXPECT_THROW(BenchmarkLatency(net, 64, 64, 0, 0), ConfigError);
  EXPECT_THROW(BenchmarkLatency(net, 64, 64, -1, 1), ConfigError);
}

TEST(LatencyTest, LargerInputTakesLonger) {
  const DmaNetParams net = BuildDmaNet(ToyConfig(), 4);
  const LatencyStats small = BenchmarkLatency(net, 128, 128, 2, 5);
  const LatencyStats large = BenchmarkLatency(net, 128, 256, 2, 5);
  EXPECT_GE(large.mean_ms, 1.2 * small.mean_ms) << small.mean_ms << " vs " << large.mean_ms;
}

TEST(ReportTest, TextAndKeyValueFormsAreWellFormed) {
  ProfileReport report = CountFlops(ToyConfig(), 64, 128);
  report.latency = LatencyStats{12.5, 0.5, 80.0, 1, 3, 64, 128, "test cpu"};
  const std::string text = FormatProfileReport(report);
  EXPECT_EQ(text.rfind("# dmanet profile v1", 0), 0u);
  EXPECT_NE(text.find(kCostTableDescription), std::string::npos);
  EXPECT_NE(text.find("total params=" + std::to_string(report.total_params)), std::string::npos);
  EXPECT_NE(text.find("latency"), std::string::npos);

  std::istringstream kv(FormatProfileKeyValues(report));
  std::map<std::string, std::string> values;
  std::string line;
  while (std::getline(kv, line)) {
    const auto eq = line.find('=');
    ASSERT_NE(eq, std::string::npos) << line;
    EXPECT_TRUE(values.emplace(line.substr(0, eq), line.substr(eq + 1)).second) << "duplicate " << line;
  }
  EXPECT_EQ(values.at("input_h"), "64");
  EXPECT_EQ(values.at("total.flops"), std::to_string(report.total_flops));
  EXPECT_EQ(values.at("layer.heads.principal.params"), std::to_string(16 * 4 + 4));
  EXPECT_TRUE(values.count("latency.mean_ms"));
}

}  // namespace
}  // namespace dmanet
