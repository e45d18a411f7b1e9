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

#include "dmanet/feature_transform.h"
#include "oracle.h"
#include "test_support.h"

namespace dmanet {
namespace {

using testing_support::RandomTensor;
using testing_support::RelErr;

FtbParams MakePerturbedFtb(std::int64_t c_in, std::int64_t c_out, testing_support::Rng& rng) {
  Rng init(rng());
  FtbParams ftb = MakeFtb(c_in, c_out, init);
  testing_support::RandomizeBuffers(ftb, rng);
  testing_support::PerturbParams(ftb, rng, 0.3);
  return ftb;
}

TEST(FeatureTransformTest, EveryIntermediateMatchesOracle) {
  testing_support::Rng rng(1);
  for (int trial = 0; trial < 3; ++trial) {
    FtbParams ftb = MakePerturbedFtb(6, 6, rng);
    const Tensor x = RandomTensor({3, 6, 5, 8}, rng);
    const oracle::Weights w = testing_support::WeightsOf(ftb, "ftb");
    for (bool training : {false, true}) {
      FtbParams copy = ftb;
      const FtbTrace t = FtbForwardTrace(copy, Var::Constant(x), training);
      const oracle::Ftb ref = oracle::FeatureTransform(w, "ftb", oracle::FromTensor(x), training);
      EXPECT_LT(RelErr(t.x_f.value(), ref.x_f), 1e-12);
      EXPECT_LT(RelErr(t.x_s.value(), ref.x_s), 1e-12);
      EXPECT_LT(RelErr(t.x_g.value(), ref.x_g), 1e-12);
      EXPECT_LT(RelErr(t.x_c.value(), ref.x_c), 1e-12);
      EXPECT_LT(RelErr(t.weights.v.value(), ref.v), 1e-12);
      EXPECT_LT(RelErr(t.weights.w.value(), ref.w), 1e-12);
      EXPECT_LT(RelErr(t.t.value(), ref.t), 1e-12);
      EXPECT_LT(RelErr(t.out.value(), ref.out), 1e-12);
    }
  }
}

TEST(FeatureTransformTest, HeadWeightsSumToOneAndTransformIsAGate) {
  testing_support::Rng rng(2);
  const FtbParams ftb = MakePerturbedFtb(4, 4, rng);
  const FtbTrace t = FtbForwardTrace(ftb, Var::Constant(RandomTensor({4, 4, 6, 6}, rng, 3.0)), false);
  ASSERT_EQ(t.weights.v.shape(), (Shape{4, 1, 1, 1}));
  for (int n = 0; n < 4; ++n) {
    EXPECT_NEAR(t.weights.v.value()[n] + t.weights.w.value()[n], 1.0, 1e-15);
  }
  for (double e : t.t.value().values()) {
    EXPECT_GT(e, 0.0);
    EXPECT_LT(e, 1.0);
  }
  EXPECT_EQ(t.x_s.shape(), (Shape{4, 1, 6, 6}));
  EXPECT_EQ(t.x_c.shape(), (Shape{4, 4, 1, 1}));
}

TEST(FeatureTransformTest, WeightPathRequiresPooledInput) {
  testing_support::Rng rng(3);
  const FtbParams ftb = MakePerturbedFtb(4, 4, rng);
  EXPECT_THROW(FtbWeightsForward(ftb, Var::Constant(Tensor(Shape{2, 4, 2, 1}))), ShapeError);
  EXPECT_NO_THROW(FtbWeightsForward(ftb, Var::Constant(Tensor(Shape{2, 4, 1, 1}))));
}

TEST(FeatureTransformTest, ChannelPathNeedsBatchOfTwoInTraining) {
  testing_support::Rng rng(4);
  const FtbParams ftb = MakePerturbedFtb(4, 4, rng);
  EXPECT_THROW(FtbForward(ftb, Var::Constant(RandomTensor({1, 4, 4, 4}, rng)), true), ValidationError);
  EXPECT_NO_THROW(FtbForward(ftb, Var::Constant(RandomTensor({1, 4, 4, 4}, rng)), false));
}

TEST(FeatureTransformTest, GradientsMatchFiniteDifferencesInTraining) {
  testing_support::Rng rng(5);
  FtbParams ftb = MakePerturbedFtb(3, 3, rng);
  Var x = Var::Parameter(RandomTensor({2, 3, 4, 4}, rng));
  const Tensor r = RandomTensor({2, 3, 4, 4}, rng);
  auto vars = testing_support::ParamsOf(ftb);
  vars.emplace_back("x", x);
  auto loss = [&] { return WeightedSum(FtbForward(ftb, x, true), r); };
  const auto result = testing_support::CheckGradients(loss, vars, {.samples_per_tensor = 8});
  EXPECT_TRUE(result.ok()) << result.Summary();
}

}  // namespace
}  // namespace dmanet
