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

#include <algorithm>
#include <cmath>

#include "dmanet/metrics.h"
#include "test_support.h"

namespace dmanet {
namespace {

// Brute-force reference straight from per-pixel label pairs.
struct Reference {
  std::vector<std::optional<double>> iou;
  double miou = 0.0;
  double accuracy = 0.0;
};

Reference BruteForce(const std::vector<std::pair<int, int>>& pairs, int k) {
  Reference r;
  std::size_t correct = 0;
  for (const auto& [t, p] : pairs) correct += (t == p);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(pairs.size());
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < k; ++c) {
    std::size_t inter = 0, uni = 0;
    for (const auto& [t, p] : pairs) {
      inter += (t == c && p == c);
      uni += (t == c || p == c);
    }
    if (uni == 0) {
      r.iou.push_back(std::nullopt);
      continue;
    }
    r.iou.push_back(static_cast<double>(inter) / static_cast<double>(uni));
    sum += *r.iou.back();
    ++defined;
  }
  r.miou = sum / defined;
  return r;
}

std::vector<std::pair<int, int>> Pairs(const LabelMap& pred, const LabelMap& truth) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < truth.data.size(); ++i) {
    if (truth.data[i] != 255) out.emplace_back(truth.data[i], pred.data[i]);
  }
  return out;
}

TEST(ConfusionMatrixTest, MatchesBruteForceOnRandomMaps) {
  testing_support::Rng rng(1);
  for (int trial = 0; trial < 25; ++trial) {
    const int k = 2 + trial % 7;
    const LabelMap truth = testing_support::RandomLabels(2, 9, 11, k, rng, 0.1);
    const LabelMap pred = testing_support::RandomLabels(2, 9, 11, k, rng);
    ConfusionMatrix cm(k);
    cm.Update(pred, truth);
    const Reference ref = BruteForce(Pairs(pred, truth), k);
    const auto iou = cm.IouPerClass();
    for (int c = 0; c < k; ++c) {
      ASSERT_EQ(iou[c].has_value(), ref.iou[c].has_value());
      if (iou[c]) EXPECT_NEAR(*iou[c], *ref.iou[c], 1e-15);
    }
    EXPECT_NEAR(cm.MeanIou(), ref.miou, 1e-15);
    EXPECT_NEAR(cm.PixelAccuracy(), ref.accuracy, 1e-15);
  }
}

TEST(ConfusionMatrixTest, PerfectPredictionScoresOne) {
  testing_support::Rng rng(2);
  const LabelMap truth = testing_support::RandomLabels(1, 8, 8, 5, rng);
  ConfusionMatrix cm(5);
  cm.Update(truth, truth);
  EXPECT_DOUBLE_EQ(cm.MeanIou(), 1.0);
  EXPECT_DOUBLE_EQ(cm.PixelAccuracy(), 1.0);
}

TEST(ConfusionMatrixTest, UpdateOrderAndMergeAreEquivalent) {
  testing_support::Rng rng(3);
  std::vector<std::pair<LabelMap, LabelMap>> batches;
  for (int i = 0; i < 5; ++i) {
    batches.emplace_back(testing_support::RandomLabels(1, 6, 6, 4, rng),
                         testing_support::RandomLabels(1, 6, 6, 4, rng, 0.2));
  }
  ConfusionMatrix forward(4), backward(4), merged(4);
  for (const auto& [p, t] : batches) forward.Update(p, t);
  for (auto it = batches.rbegin(); it != batches.rend(); ++it) backward.Update(it->first, it->second);
  for (const auto& [p, t] : batches) {
    ConfusionMatrix part(4);
    part.Update(p, t);
    merged.Merge(part);
  }
  EXPECT_EQ(forward, backward);
  EXPECT_EQ(forward, merged);
  EXPECT_THROW(merged.Merge(ConfusionMatrix(3)), ValidationError);
}

TEST(ConfusionMatrixTest, AbsentClassesAreExcludedFromMean) {
  LabelMap truth(1, 1, 4), pred(1, 1, 4);
  truth.data = {0, 0, 1, 1};
  pred.data = {0, 1, 1, 1};
  ConfusionMatrix cm(4);
  cm.Update(pred, truth);
  const auto iou = cm.IouPerClass();
  EXPECT_FALSE(iou[2].has_value());
  EXPECT_FALSE(iou[3].has_value());
  EXPECT_DOUBLE_EQ(*iou[0], 0.5);
  EXPECT_DOUBLE_EQ(*iou[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(cm.MeanIou(), (0.5 + 2.0 / 3.0) / 2.0);
  EXPECT_DOUBLE_EQ(cm.PixelAccuracy(), 0.75);
}

TEST(ConfusionMatrixTest, IgnoredTruthPixelsAreSkipped) {
  LabelMap truth(1, 1, 3), pred(1, 1, 3);
  truth.data = {255, 1, 255};
  pred.data = {0, 1, 1};
  ConfusionMatrix cm(2);
  cm.Update(pred, truth);
  EXPECT_EQ(cm.total(), 1u);
  EXPECT_EQ(cm.at(1, 1), 1u);
}

TEST(ConfusionMatrixTest, RejectsInvalidInput) {
  ConfusionMatrix cm(3);
  EXPECT_THROW(cm.PixelAccuracy(), ValidationError);
  EXPECT_THROW(cm.MeanIou(), ValidationError);
  EXPECT_THROW(cm.Update(LabelMap(1, 2, 2), LabelMap(1, 2, 3)), ValidationError);
  LabelMap bad(1, 1, 1, 3);
  EXPECT_THROW(cm.Update(bad, LabelMap(1, 1, 1)), ValidationError);
  EXPECT_THROW(cm.Update(LabelMap(1, 1, 1), bad), ValidationError);
  EXPECT_THROW(cm.Update(LabelMap(1, 1, 1, 255), LabelMap(1, 1, 1)), ValidationError);
}

TEST(MetricReportTest, ListsClassesAndMarksUndefinedOnes) {
  LabelMap truth(1, 1, 2), pred(1, 1, 2);
  truth.data = {0, 1};
  pred.data = {0, 0};
  ConfusionMatrix cm(3);
  cm.Update(pred, truth);
  const std::string report = FormatMetricReport(cm, {"road", "car", "sky"});
  EXPECT_NE(report.find("road"), std::string::npos);
  EXPECT_NE(report.find("sky"), std::string::npos);
  EXPECT_NE(report.find("-"), std::string::npos);
  EXPECT_NE(report.find("mIoU"), std::string::npos);
  const std::string unnamed = FormatMetricReport(cm, {});
  EXPECT_NE(unnamed.find("2"), std::string::npos);
}

}  // namespace
}  // namespace dmanet
