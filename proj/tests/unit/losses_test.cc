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

#include "dmanet/losses.h"
#include "oracle.h"
#include "test_support.h"

namespace dmanet {
namespace {

using testing_support::RandomLabels;
using testing_support::RandomTensor;

TEST(CrossEntropyTest, UniformLogitsGiveLogK) {
  for (int k : {2, 4, 19}) {
    testing_support::Rng rng(k);
    const LabelMap labels = RandomLabels(2, 5, 7, k, rng, 0.2);
    const Var loss = PixelCrossEntropy(Var::Constant(Tensor(Shape{2, k, 5, 7}, 0.37)), labels);
    EXPECT_NEAR(loss.value()[0], std::log(static_cast<double>(k)), 1e-12);
  }
}

TEST(CrossEntropyTest, MatchesOracleWithIgnoredPixels) {
  testing_support::Rng rng(1);
  const Tensor logits = RandomTensor({2, 5, 6, 6}, rng, 3.0);
  const LabelMap labels = RandomLabels(2, 6, 6, 5, rng, 0.3);
  const double ref = oracle::CrossEntropy(oracle::FromTensor(logits), labels.data);
  EXPECT_NEAR(PixelCrossEntropy(Var::Constant(logits), labels).value()[0], ref, 1e-12 * std::abs(ref));
}

TEST(CrossEntropyTest, InvariantToPerPixelShift) {
  testing_support::Rng rng(2);
  Tensor logits = RandomTensor({1, 3, 4, 4}, rng);
  const LabelMap labels = RandomLabels(1, 4, 4, 3, rng);
  const double base = PixelCrossEntropy(Var::Constant(logits), labels).value()[0];
  for (std::int64_t y = 0; y < 4; ++y) {
    for (std::int64_t x = 0; x < 4; ++x) {
      for (std::int64_t c = 0; c < 3; ++c) logits.at(0, c, y, x) += 100.0 * static_cast<double>(y * 4 + x);
    }
  }
  EXPECT_NEAR(PixelCrossEntropy(Var::Constant(logits), labels).value()[0], base, 1e-10);
}

TEST(CrossEntropyTest, AllIgnoredGivesZeroAndNoGradient) {
  Var logits = Var::Parameter(Tensor(Shape{1, 3, 2, 2}, 1.0));
  const LabelMap labels(1, 2, 2, 255);
  const Var loss = PixelCrossEntropy(logits, labels);
  EXPECT_EQ(loss.value()[0], 0.0);
  Backward(loss);
  for (double g : logits.grad().values()) EXPECT_EQ(g, 0.0);
}

TEST(CrossEntropyTest, RejectsOutOfRangeLabelsAndShapeMismatch) {
  LabelMap labels(1, 2, 2, 0);
  labels.at(0, 1, 1) = 3;
  EXPECT_THROW(PixelCrossEntropy(Var::Constant(Tensor(Shape{1, 3, 2, 2})), labels), ValidationError);
  EXPECT_THROW(PixelCrossEntropy(Var::Constant(Tensor(Shape{1, 3, 2, 3})), LabelMap(1, 2, 2)), ShapeError);
}

TEST(CrossEntropyTest, PerPixelValuesMarkIgnoredAsNaN) {
  LabelMap labels(1, 1, 2, 0);
  labels.at(0, 0, 1) = 255;
  const std::vector<double> v = PerPixelCrossEntropy(Tensor(Shape{1, 2, 1, 2}), labels);
  EXPECT_NEAR(v[0], std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isnan(v[1]));
}

TEST(OhemTest, MatchesOracleAcrossThresholds) {
  testing_support::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor logits = RandomTensor({2, 4, 6, 5}, rng, 2.5);
    const LabelMap labels = RandomLabels(2, 6, 5, 4, rng, 0.1);
    const double threshold = 0.2 + 0.04 * trial;
    const OhemConfig cfg{threshold, 1.0 / 16.0};
    const double ref = oracle::Ohem(oracle::FromTensor(logits), labels.data, threshold, 1.0 / 16.0);
    EXPECT_NEAR(OhemCrossEntropy(Var::Constant(logits), labels, cfg).value()[0], ref, 1e-12 * (1.0 + ref)) << trial;
  }
}

TEST(OhemTest, NeverBelowPlainCrossEntropy) {
  testing_support::Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor logits = RandomTensor({1, 3, 8, 8}, rng, 4.0);
    const LabelMap labels = RandomLabels(1, 8, 8, 3, rng, 0.05);
    const double ce = PixelCrossEntropy(Var::Constant(logits), labels).value()[0];
    const double ohem = OhemCrossEntropy(Var::Constant(logits), labels, {}).value()[0];
    EXPECT_GE(ohem, ce - 1e-12);
  }
}

TEST(OhemTest, KeepingEveryPixelEqualsCrossEntropy) {
  testing_support::Rng rng(5);
  const Tensor logits = RandomTensor({2, 3, 4, 4}, rng);
  const LabelMap labels = RandomLabels(2, 4, 4, 3, rng, 0.25);
  const double ce = PixelCrossEntropy(Var::Constant(logits), labels).value()[0];
  EXPECT_NEAR(OhemCrossEntropy(Var::Constant(logits), labels, {1.0, 1.0}).value()[0], ce, 1e-14);
}

TEST(OhemTest, MinimumKeepTakesHardestPixels) {
  // Four pixels, all easy; the hardest one alone must be kept.
  Tensor logits(Shape{1, 2, 1, 4});
  const double margins[4] = {5.0, 2.0, 8.0, 3.0};
  for (int i = 0; i < 4; ++i) logits.at(0, 0, 0, i) = margins[i];
  const LabelMap labels(1, 1, 4, 0);
  const double loss = OhemCrossEntropy(Var::Constant(logits), labels, {0.5, 0.25}).value()[0];
  EXPECT_NEAR(loss, std::log1p(std::exp(-2.0)), 1e-15);
}

TEST(OhemTest, GradientFlowsOnlyThroughKeptPixels) {
  Tensor init(Shape{1, 2, 1, 4});
  const double margins[4] = {5.0, -1.0, 8.0, 0.0};
  for (int i = 0; i < 4; ++i) init.at(0, 0, 0, i) = margins[i];
  Var logits = Var::Parameter(init);
  Backward(OhemCrossEntropy(logits, LabelMap(1, 1, 4, 0), {0.7, 0.25}));
  EXPECT_EQ(logits.grad().at(0, 0, 0, 0), 0.0);
  EXPECT_EQ(logits.grad().at(0, 0, 0, 2), 0.0);
  EXPECT_LT(logits.grad().at(0, 0, 0, 1), 0.0);
  EXPECT_LT(logits.grad().at(0, 0, 0, 3), 0.0);
}

TEST(OhemTest, GradientsMatchFiniteDifferences) {
  testing_support::Rng rng(6);
  Var logits = Var::Parameter(RandomTensor({2, 3, 3, 3}, rng, 2.0));
  const LabelMap labels = RandomLabels(2, 3, 3, 3, rng, 0.1);
  auto loss = [&] { return OhemCrossEntropy(logits, labels, {0.6, 0.1}); };
  const auto result = testing_support::CheckGradients(loss, {{"logits", logits}}, {.samples_per_tensor = 54});
  EXPECT_TRUE(result.ok()) << result.Summary();
}

TEST(OhemTest, ConfigValidation) {
  EXPECT_THROW((OhemConfig{0.0, 0.1}.Validate()), ConfigError);
  EXPECT_THROW((OhemConfig{1.1, 0.1}.Validate()), ConfigError);
  EXPECT_THROW((OhemConfig{0.7, 0.0}.Validate()), ConfigError);
  EXPECT_NO_THROW((OhemConfig{1.0, 1.0}.Validate()));
}

TEST(JointLossTest, MatchesOracleAndWeightsAuxiliaryHeads) {
  testing_support::Rng rng(7);
  ModelOutputs out;
  out.principal = Var::Constant(RandomTensor({2, 4, 4, 4}, rng, 2.0));
  out.aux_mid = Var::Constant(RandomTensor({2, 4, 4, 4}, rng, 2.0));
  out.aux_high = Var::Constant(RandomTensor({2, 4, 4, 4}, rng, 2.0));
  const LabelMap labels = RandomLabels(2, 4, 4, 4, rng, 0.1);
  const oracle::Outputs ref{oracle::FromTensor(out.principal.value()), oracle::FromTensor(out.aux_mid.value()),
                            oracle::FromTensor(out.aux_high.value())};
  const OhemConfig cfg;
  for (double lambda : {0.0, 0.2, 1.0, 3.5}) {
    const double got = JointLoss(out, labels, lambda, cfg).value()[0];
    EXPECT_NEAR(got, oracle::Joint(ref, labels.data, lambda, cfg.prob_threshold, cfg.min_keep_fraction), 1e-12);
  }
  const double principal = OhemCrossEntropy(out.principal, labels, cfg).value()[0];
  EXPECT_EQ(JointLoss(out, labels, 0.0, cfg).value()[0], principal);
}

TEST(JointLossTest, LambdaZeroIgnoresAuxHeadsEntirely) {
  testing_support::Rng rng(8);
  ModelOutputs out;
  out.principal = Var::Constant(RandomTensor({2, 3, 4, 4}, rng));
  const LabelMap labels = RandomLabels(2, 4, 4, 3, rng);
  EXPECT_NO_THROW(JointLoss(out, labels, 0.0, {}));
  EXPECT_THROW(JointLoss(out, labels, 0.5, {}), ConfigError);
  EXPECT_THROW(JointLoss(out, labels, -0.1, {}), ConfigError);
}

}  // namespace
}  // namespace dmanet
