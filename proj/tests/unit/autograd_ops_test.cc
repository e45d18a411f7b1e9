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

#include "dmanet/layers.h"
#include "dmanet/ops.h"
#include "oracle.h"
#include "test_support.h"

namespace dmanet {
namespace {

using testing_support::CheckGradients;
using testing_support::RandomTensor;
using testing_support::RelErr;

TEST(ConvTest, MatchesDirectLoopsAcrossGeometries) {
  testing_support::Rng rng(1);
  const ConvGeometry geometries[] = {{1, 0, 1}, {1, 1, 1}, {2, 1, 1}, {1, 2, 2}, {1, 4, 4}, {2, 3, 1}};
  const int kernels[] = {1, 3, 3, 3, 3, 7};
  for (int g = 0; g < 6; ++g) {
    const int k = kernels[g];
    Tensor x = RandomTensor({2, 3, 9, 11}, rng);
    Tensor w = RandomTensor({4, 3, k, k}, rng);
    Tensor b = RandomTensor({4}, rng);
    const ConvGeometry geo = geometries[g];
    const Var out = Conv2d(Var::Constant(x), Var::Constant(w), Var::Constant(b), geo);
    const oracle::Arr ob = oracle::FromTensor(b);
    const oracle::Arr ref =
        oracle::Conv(oracle::FromTensor(x), oracle::FromTensor(w), &ob, geo.stride, geo.padding, geo.dilation);
    EXPECT_EQ(out.shape(), (Shape{ref.n, ref.c, ref.h, ref.w}));
    EXPECT_LT(RelErr(out.value(), ref), 1e-12) << "geometry " << g;
  }
}

TEST(ConvTest, PointwiseWithoutBiasOnOnePixel) {
  const Tensor x(Shape{1, 2, 1, 1}, {1.5, -2.0});
  const Tensor w(Shape{2, 2, 1, 1}, {1.0, 2.0, 3.0, 4.0});
  const Var out = Conv2d(Var::Constant(x), Var::Constant(w), Var(), {});
  EXPECT_DOUBLE_EQ(out.value()[0], 1.5 - 4.0);
  EXPECT_DOUBLE_EQ(out.value()[1], 4.5 - 8.0);
}

TEST(ConvTest, RejectsChannelMismatch) {
  const Var x = Var::Constant(Tensor(Shape{1, 3, 4, 4}));
  const Var w = Var::Constant(Tensor(Shape{2, 5, 3, 3}));
  EXPECT_THROW(Conv2d(x, w, Var(), {1, 1, 1}), ShapeError);
}

TEST(ConvTest, GradientsMatchFiniteDifferences) {
  testing_support::Rng rng(2);
  Var x = Var::Parameter(RandomTensor({2, 2, 6, 5}, rng));
  Var w = Var::Parameter(RandomTensor({3, 2, 3, 3}, rng));
  Var b = Var::Parameter(RandomTensor({3}, rng));
  const Tensor r = RandomTensor({2, 3, 3, 3}, rng);
  auto loss = [&] { return WeightedSum(Conv2d(x, w, b, {2, 2, 2}), r); };
  const auto result = CheckGradients(loss, {{"x", x}, {"w", w}, {"b", b}}, {.samples_per_tensor = 20});
  EXPECT_TRUE(result.ok()) << result.Summary();
}

TEST(BatchNormTest, TrainingAndInferenceMatchOracle) {
  testing_support::Rng rng(3);
  const Tensor x = RandomTensor({3, 4, 5, 6}, rng, 2.0);
  const Tensor gamma = RandomTensor({4}, rng), beta = RandomTensor({4}, rng);
  Tensor mean = RandomTensor({4}, rng);
  Tensor var = testing_support::UniformTensor({4}, rng, 0.5, 2.0);
  const oracle::Arr og = oracle::FromTensor(gamma), ob = oracle::FromTensor(beta);
  const oracle::Arr om = oracle::FromTensor(mean), ov = oracle::FromTensor(var);
  for (bool training : {false, true}) {
    Tensor m = mean, v = var;
    const Var out = BatchNorm2d(Var::Constant(x), Var::Constant(gamma), Var::Constant(beta), m, v, training, 0.1, 1e-5);
    const oracle::Arr ref = oracle::BatchNorm(oracle::FromTensor(x), og, ob, om, ov, training);
    EXPECT_LT(RelErr(out.value(), ref), 1e-12) << "training " << training;
  }
}

TEST(BatchNormTest, TrainingUpdatesRunningStatisticsWithUnbiasedVariance) {
  const Tensor x(Shape{2, 1, 1, 2}, {1.0, 3.0, 5.0, 7.0});
  Tensor mean(Shape{1}, 0.0), var(Shape{1}, 1.0);
  BatchNorm2d(Var::Constant(x), Var::Constant(Tensor(Shape{1}, 1.0)), Var::Constant(Tensor(Shape{1}, 0.0)), mean, var,
              true, 0.1, 1e-5);
  // Batch mean 4, unbiased variance 20/3.
  EXPECT_NEAR(mean[0], 0.1 * 4.0, 1e-15);
  EXPECT_NEAR(var[0], 0.9 + 0.1 * 20.0 / 3.0, 1e-15);
}

TEST(BatchNormTest, TrainingNeedsMoreThanOneValuePerChannel) {
  Tensor mean(Shape{2}), var(Shape{2}, 1.0);
  const Var x = Var::Constant(Tensor(Shape{1, 2, 1, 1}, 1.0));
  const Var g = Var::Constant(Tensor(Shape{2}, 1.0)), b = Var::Constant(Tensor(Shape{2}));
  EXPECT_THROW(BatchNorm2d(x, g, b, mean, var, true, 0.1, 1e-5), ValidationError);
  EXPECT_NO_THROW(BatchNorm2d(x, g, b, mean, var, false, 0.1, 1e-5));
}

TEST(BatchNormTest, GradientsMatchFiniteDifferences) {
  testing_support::Rng rng(4);
  Var x = Var::Parameter(RandomTensor({2, 3, 3, 2}, rng));
  Var g = Var::Parameter(RandomTensor({3}, rng));
  Var b = Var::Parameter(RandomTensor({3}, rng));
  const Tensor r = RandomTensor({2, 3, 3, 2}, rng);
  Tensor mean(Shape{3}), var(Shape{3}, 1.0);
  auto loss = [&] { return WeightedSum(BatchNorm2d(x, g, b, mean, var, true, 0.1, 1e-5), r); };
  const auto result = CheckGradients(loss, {{"x", x}, {"gamma", g}, {"beta", b}}, {.samples_per_tensor = 36});
  EXPECT_TRUE(result.ok()) << result.Summary();
}

TEST(ElementwiseTest, ActivationsMatchOracle) {
  testing_support::Rng rng(5);
  const Tensor x = RandomTensor({2, 3, 4, 5}, rng, 3.0);
  const oracle::Arr ox = oracle::FromTensor(x);
  EXPECT_LT(RelErr(Relu(Var::Constant(x)).value(), oracle::Relu(ox)), 1e-15);
  EXPECT_LT(RelErr(LeakyRelu(Var::Constant(x), 0.01).value(), oracle::LeakyRelu(ox, 0.01)), 1e-15);
  EXPECT_LT(RelErr(Sigmoid(Var::Constant(x)).value(), oracle::Sigmoid(ox)), 1e-14);
  EXPECT_LT(RelErr(SoftmaxChannels(Var::Constant(x)).value(), oracle::SoftmaxChannels(ox)), 1e-14);
}

TEST(ElementwiseTest, SigmoidIsStableAtExtremes) {
  const Tensor x(Shape{1, 1, 1, 4}, {-800.0, -40.0, 40.0, 800.0});
  const Tensor y = Sigmoid(Var::Constant(x)).value();
  EXPECT_TRUE(y.AllFinite());
  EXPECT_EQ(y[0], 0.0);
  EXPECT_GT(y[1], 0.0);
  EXPECT_LE(y[2], 1.0);
  EXPECT_EQ(y[3], 1.0);
}

TEST(ElementwiseTest, BroadcastingMatchesOracle) {
  testing_support::Rng rng(6);
  const Tensor a = RandomTensor({2, 3, 4, 5}, rng);
  const Tensor spatial = RandomTensor({2, 1, 4, 5}, rng);
  const Tensor channel = RandomTensor({2, 3, 1, 1}, rng);
  const Tensor scalar = RandomTensor({2, 1, 1, 1}, rng);
  for (const Tensor* b : {&spatial, &channel, &scalar}) {
    EXPECT_LT(RelErr(Add(Var::Constant(a), Var::Constant(*b)).value(),
                     oracle::Add(oracle::FromTensor(a), oracle::FromTensor(*b))),
              1e-15);
    EXPECT_LT(RelErr(Mul(Var::Constant(*b), Var::Constant(a)).value(),
                     oracle::Mul(oracle::FromTensor(*b), oracle::FromTensor(a))),
              1e-15);
  }
  // Two broadcast operands meeting in the middle.
  EXPECT_EQ(Add(Var::Constant(spatial), Var::Constant(channel)).shape(), (Shape{2, 3, 4, 5}));
  EXPECT_THROW(Add(Var::Constant(a), Var::Constant(Tensor(Shape{2, 2, 4, 5}))), ShapeError);
}

TEST(ElementwiseTest, GradientsMatchFiniteDifferences) {
  testing_support::Rng rng(7);
  Var a = Var::Parameter(RandomTensor({2, 3, 3, 3}, rng));
  Var s = Var::Parameter(RandomTensor({2, 1, 3, 3}, rng));
  Var c = Var::Parameter(RandomTensor({2, 3, 1, 1}, rng));
  const Tensor r = RandomTensor({2, 3, 3, 3}, rng);
  auto loss = [&] {
    Var y = Add(Mul(Sigmoid(s), a), Mul(c, LeakyRelu(a, 0.01)));
    y = Add(Relu(y), SoftmaxChannels(Scale(y, 0.5)));
    return WeightedSum(y, r);
  };
  const auto result = CheckGradients(loss, {{"a", a}, {"s", s}, {"c", c}}, {.samples_per_tensor = 30});
  EXPECT_TRUE(result.ok()) << result.Summary();
}

TEST(ShapeOpsTest, ConcatAndSliceRoundTrip) {
  testing_support::Rng rng(8);
  const Tensor a = RandomTensor({2, 3, 4, 4}, rng), b = RandomTensor({2, 2, 4, 4}, rng);
  const Var cat = ConcatChannels(Var::Constant(a), Var::Constant(b));
  EXPECT_LT(RelErr(cat.value(), oracle::Concat(oracle::FromTensor(a), oracle::FromTensor(b))), 1e-15);
  EXPECT_EQ(SliceChannels(cat, 0, 3).value().values()[7], a.values()[7]);
  EXPECT_LT(RelErr(SliceChannels(cat, 4, 1).value(), oracle::Channel(oracle::FromTensor(b), 1)), 1e-15);
  EXPECT_THROW(SliceChannels(cat, 4, 2), ShapeError);
  EXPECT_THROW(ConcatChannels(Var::Constant(a), Var::Constant(Tensor(Shape{2, 2, 4, 3}))), ShapeError);
}

TEST(PoolingTest, MatchesOracle) {
  testing_support::Rng rng(9);
  const Tensor x = RandomTensor({2, 3, 16, 8}, rng);
  const oracle::Arr ox = oracle::FromTensor(x);
  EXPECT_LT(RelErr(MaxPool2d(Var::Constant(x), 3, 2, 1).value(), oracle::MaxPool3x3s2(ox)), 1e-15);
  for (int f : {2, 4, 8}) EXPECT_LT(RelErr(AvgPool2d(Var::Constant(x), f).value(), oracle::AvgPool(ox, f)), 1e-14);
  EXPECT_LT(RelErr(GlobalAvgPool(Var::Constant(x)).value(), oracle::GlobalAvgPool(ox)), 1e-14);
  EXPECT_THROW(AvgPool2d(Var::Constant(Tensor(Shape{1, 1, 6, 6})), 4), ShapeError);
}

TEST(PoolingTest, GradientsMatchFiniteDifferences) {
  testing_support::Rng rng(10);
  Var x = Var::Parameter(RandomTensor({2, 2, 8, 8}, rng));
  const Tensor r1 = RandomTensor({2, 2, 4, 4}, rng), r2 = RandomTensor({2, 2, 2, 2}, rng);
  const Tensor r3 = RandomTensor({2, 2, 1, 1}, rng);
  auto loss = [&] {
    return Add(Add(WeightedSum(MaxPool2d(x, 3, 2, 1), r1), WeightedSum(AvgPool2d(x, 4), r2)),
               WeightedSum(GlobalAvgPool(x), r3));
  };
  const auto result = CheckGradients(loss, {{"x", x}}, {.samples_per_tensor = 60});
  EXPECT_TRUE(result.ok()) << result.Summary();
}

TEST(UpsampleTest, MatchesOracleForUpAndDownScaling) {
  testing_support::Rng rng(11);
  const Tensor x = RandomTensor({2, 3, 4, 6}, rng);
  for (auto [h, w] : {std::pair{8, 12}, std::pair{32, 48}, std::pair{4, 6}, std::pair{3, 5}, std::pair{1, 1}}) {
    EXPECT_LT(RelErr(UpsampleBilinear(Var::Constant(x), h, w).value(), oracle::UpsampleBilinear(oracle::FromTensor(x), h, w)),
              1e-14)
        << h << "x" << w;
  }
}

TEST(UpsampleTest, OnePixelInputBroadcasts) {
  const Tensor x(Shape{1, 2, 1, 1}, {3.0, -1.0});
  const Tensor y = UpsampleBilinear(Var::Constant(x), 4, 5).value();
  for (std::int64_t i = 0; i < 20; ++i) EXPECT_EQ(y[i], 3.0);
  for (std::int64_t i = 20; i < 40; ++i) EXPECT_EQ(y[i], -1.0);
}

TEST(UpsampleTest, GradientsMatchFiniteDifferences) {
  testing_support::Rng rng(12);
  Var x = Var::Parameter(RandomTensor({1, 2, 3, 4}, rng));
  const Tensor r = RandomTensor({1, 2, 12, 16}, rng);
  auto loss = [&] { return WeightedSum(UpsampleBilinear(x, 12, 16), r); };
  const auto result = CheckGradients(loss, {{"x", x}}, {.samples_per_tensor = 24});
  EXPECT_TRUE(result.ok()) << result.Summary();
}

TEST(AutogradTest, NoGradGuardSkipsRecording) {
  Var x = Var::Parameter(Tensor(Shape{1, 1, 1, 1}, 2.0));
  {
    NoGradGuard guard;
    EXPECT_FALSE(GradEnabled());
    const Var y = Relu(x);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(GradEnabled());
  EXPECT_TRUE(Relu(x).requires_grad());
}

TEST(AutogradTest, SharedSubgraphAccumulatesGradients) {
  Var x = Var::Parameter(Tensor(Shape{1, 1, 1, 1}, 3.0));
  const Var y = Mul(x, x);  // d/dx = 2x
  Backward(Add(y, x));      // + 1
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(CostSinkTest, RecordsPointwiseConvolutionFlops) {
  testing_support::Rng rng(13);
  struct Capture : OpCostSink {
    void Record(const std::string& op, std::int64_t flops, std::int64_t macs) override {
      last_op = op;
      last_flops = flops;
      last_macs = macs;
    }
    std::string last_op;
    std::int64_t last_flops = 0, last_macs = 0;
  } sink;
  ScopedOpCostSink scope(&sink);
  Conv2d(Var::Constant(RandomTensor({1, 2, 1, 1}, rng)), Var::Constant(RandomTensor({2, 2, 1, 1}, rng)), Var(), {});
  EXPECT_EQ(sink.last_op, "conv2d");
  EXPECT_EQ(sink.last_flops, 8);
  EXPECT_EQ(sink.last_macs, 4);
}

TEST(LayersTest, KaimingNormalHasFanInVariance) {
  Rng rng(14);
  const Tensor w = KaimingNormal({256, 64, 3, 3}, 64 * 9, rng);
  double mean = 0.0, sq = 0.0;
  for (double v : w.values()) mean += v;
  mean /= static_cast<double>(w.size());
  for (double v : w.values()) sq += (v - mean) * (v - mean);
  const double var = sq / static_cast<double>(w.size());
  EXPECT_NEAR(mean, 0.0, 2e-3);
  EXPECT_NEAR(var / (2.0 / 576.0), 1.0, 0.02);
}

}  // namespace
}  // namespace dmanet
