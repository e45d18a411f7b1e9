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
// Straight-line 64-bit reference implementations used as test oracles.
//
// Nothing here calls into the library's ops: every operator is a direct loop
// over an independent array type, written from the layer equations.

#ifndef DMANET_TESTS_ORACLE_ORACLE_H_
#define DMANET_TESTS_ORACLE_ORACLE_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dmanet/tensor.h"
#include "dmanet/weight_archive.h"

namespace oracle {

// Rank-4 (N, C, H, W) array, or a flat vector for parameters.
struct Arr {
  std::int64_t n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Arr() = default;
  Arr(std::int64_t n_, std::int64_t c_, std::int64_t h_, std::int64_t w_, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_ * c_ * h_ * w_), fill) {}

  double& operator()(std::int64_t i, std::int64_t k, std::int64_t y, std::int64_t x) {
    return v[static_cast<std::size_t>(((i * c + k) * h + y) * w + x)];
  }
  double operator()(std::int64_t i, std::int64_t k, std::int64_t y, std::int64_t x) const {
    return v[static_cast<std::size_t>(((i * c + k) * h + y) * w + x)];
  }
};

Arr FromTensor(const dmanet::Tensor& t);
dmanet::Tensor ToTensor(const Arr& a);

// Parameters by name; conv weights keep their (C_out, C_in, k, k) layout in
// the n/c/h/w fields, vectors live in `v` with n = size.
using Weights = std::map<std::string, Arr>;
Weights FromArchive(const dmanet::WeightArchive& archive);

Arr Conv(const Arr& x, const Arr& weight, const Arr* bias, int stride, int pad, int dilation);
Arr BatchNorm(const Arr& x, const Arr& gamma, const Arr& beta, const Arr& mean, const Arr& var, bool training,
              double eps = 1e-5);
Arr Relu(const Arr& x);
Arr LeakyRelu(const Arr& x, double slope);
Arr Sigmoid(const Arr& x);
// Elementwise with broadcasting of size-1 axes on either side.
Arr Add(const Arr& a, const Arr& b);
Arr Mul(const Arr& a, const Arr& b);
Arr Concat(const Arr& a, const Arr& b);
Arr Channel(const Arr& x, std::int64_t k);
Arr AvgPool(const Arr& x, int factor);
Arr GlobalAvgPool(const Arr& x);
Arr MaxPool3x3s2(const Arr& x);
Arr UpsampleBilinear(const Arr& x, std::int64_t out_h, std::int64_t out_w);
Arr SoftmaxChannels(const Arr& x);

struct Lattice {
  Arr p, q, f;
};
Lattice LatticeCombine(const Arr& x, const Arr& t, const Arr& a, const Arr& b);

// Building blocks addressed by parameter-name prefix.
Arr ConvNamed(const Weights& w, const std::string& name, const Arr& x, int stride, int pad, int dilation);
Arr BnNamed(const Weights& w, const std::string& name, const Arr& x, bool training);
Arr Cbr(const Weights& w, const std::string& name, const Arr& x, bool training);

Arr ContextualModule(const Weights& w, const std::string& prefix, const Arr& x, bool training, int r1, int r2);
Arr SpatialModule(const Weights& w, const std::string& prefix, const Arr& fc, const Arr& m, bool training);
Arr Lerb(const Weights& w, const std::string& prefix, const Arr& x, const Arr& m, bool training, int r1, int r2);

struct Ftb {
  Arr x_f, x_s, x_g, x_c, v, w, t, out;
};
Ftb FeatureTransform(const Weights& w, const std::string& prefix, const Arr& x, bool training, double slope = 0.01);
Arr GlobalContext(const Weights& w, const std::string& prefix, const Arr& f32, bool training);

struct Taps {
  Arr f4, f8, f16, f32;
};
Taps Encoder(const Weights& w, const Arr& images, bool training);

struct Outputs {
  Arr principal, aux_mid, aux_high;
};
Outputs DmaNet(const Weights& w, const Arr& images, bool training, int r1, int r2);

// Losses over (N, K, H, W) logits and a flat label vector (255 = ignore).
double CrossEntropy(const Arr& logits, const std::vector<std::uint8_t>& labels);
double Ohem(const Arr& logits, const std::vector<std::uint8_t>& labels, double threshold, double min_keep_fraction);
double Joint(const Outputs& out, const std::vector<std::uint8_t>& labels, double lambda, double threshold,
             double min_keep_fraction);

}  // namespace oracle

#endif  // DMANET_TESTS_ORACLE_ORACLE_H_
