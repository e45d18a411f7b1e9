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
#include "dmanet/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace dmanet {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

thread_local OpCostSink* g_cost_sink = nullptr;

void RecordCost(const char* op, std::int64_t flops, std::int64_t macs = 0) {
  if (g_cost_sink) g_cost_sink->Record(op, flops, macs);
}

// Upper bound on im2col buffer entries per chunk.
constexpr std::int64_t kMaxColumnEntries = std::int64_t{1} << 22;

struct ConvDims {
  std::int64_t n, c_in, h, w;
  std::int64_t c_out, kh, kw;
  std::int64_t h_out, w_out;
  int stride, padding, dilation;

  std::int64_t patch() const { return c_in * kh * kw; }
  std::int64_t out_plane() const { return h_out * w_out; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && padding == 0; }
  std::int64_t rows_per_chunk() const {
    return std::clamp<std::int64_t>(kMaxColumnEntries / std::max<std::int64_t>(1, patch() * w_out), 1, h_out);
  }
};

// Fills `cols` (patch x rows*w_out) for output rows [r0, r0 + rows) of one sample.
void Im2Col(const ConvDims& d, const double* x, std::int64_t r0, std::int64_t rows, double* cols) {
  const std::int64_t ncols = rows * d.w_out;
  for (std::int64_t c = 0; c < d.c_in; ++c) {
    const double* plane = x + c * d.h * d.w;
    for (std::int64_t ki = 0; ki < d.kh; ++ki) {
      for (std::int64_t kj = 0; kj < d.kw; ++kj) {
        double* dst = cols + ((c * d.kh + ki) * d.kw + kj) * ncols;
        for (std::int64_t r = 0; r < rows; ++r) {
          const std::int64_t ih = (r0 + r) * d.stride - d.padding + ki * d.dilation;
          double* row = dst + r * d.w_out;
          if (ih < 0 || ih >= d.h) {
            std::fill(row, row + d.w_out, 0.0);
            continue;
          }
          const double* src = plane + ih * d.w;
          for (std::int64_t ow = 0; ow < d.w_out; ++ow) {
            const std::int64_t iw = ow * d.stride - d.padding + kj * d.dilation;
            row[ow] = (iw >= 0 && iw < d.w) ? src[iw] : 0.0;
          }
        }
      }
    }
  }
}

void Col2ImAdd(const ConvDims& d, const double* cols, std::int64_t r0, std::int64_t rows, double* dx) {
  const std::int64_t ncols = rows * d.w_out;
  for (std::int64_t c = 0; c < d.c_in; ++c) {
    double* plane = dx + c * d.h * d.w;
    for (std::int64_t ki = 0; ki < d.kh; ++ki) {
      for (std::int64_t kj = 0; kj < d.kw; ++kj) {
        const double* src = cols + ((c * d.kh + ki) * d.kw + kj) * ncols;
        for (std::int64_t r = 0; r < rows; ++r) {
          const std::int64_t ih = (r0 + r) * d.stride - d.padding + ki * d.dilation;
          if (ih < 0 || ih >= d.h) continue;
          double* dst = plane + ih * d.w;
          const double* row = src + r * d.w_out;
          for (std::int64_t ow = 0; ow < d.w_out; ++ow) {
            const std::int64_t iw = ow * d.stride - d.padding + kj * d.dilation;
            if (iw >= 0 && iw < d.w) dst[iw] += row[ow];
          }
        }
      }
    }
  }
}

Shape BroadcastShape(const Shape& a, const Shape& b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": rank mismatch between " + ShapeToString(a) + " and " + ShapeToString(b));
  }
  Shape out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i] || b[i] == 1) {
      out[i] = a[i];
    } else if (a[i] == 1) {
      out[i] = b[i];
    } else {
      throw ShapeError(std::string(op) + ": operands " + ShapeToString(a) + " and " + ShapeToString(b) +
                       " are not broadcast-compatible on axis " + std::to_string(i));
    }
  }
  return out;
}

// Strides of `s` viewed through broadcast shape `out`; zero on broadcast axes.
std::array<std::int64_t, 4> BroadcastStrides(const Shape& s, const Shape& out) {
  std::array<std::int64_t, 4> strides{};
  std::int64_t step = 1;
  for (int i = 3; i >= 0; --i) {
    strides[i] = (s[i] == 1 && out[i] != 1) ? 0 : step;
    step *= s[i];
  }
  return strides;
}

template <typename F>
void ForEachBroadcast(const Shape& out, const std::array<std::int64_t, 4>& sa, const std::array<std::int64_t, 4>& sb,
                      F&& f) {
  std::int64_t o = 0;
  for (std::int64_t i0 = 0; i0 < out[0]; ++i0) {
    for (std::int64_t i1 = 0; i1 < out[1]; ++i1) {
      for (std::int64_t i2 = 0; i2 < out[2]; ++i2) {
        std::int64_t ia = i0 * sa[0] + i1 * sa[1] + i2 * sa[2];
        std::int64_t ib = i0 * sb[0] + i1 * sb[1] + i2 * sb[2];
        for (std::int64_t i3 = 0; i3 < out[3]; ++i3, ++o, ia += sa[3], ib += sb[3]) f(o, ia, ib);
      }
    }
  }
}

void RequireRank4(const Tensor& t, const char* op, const char* operand) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(op) + ": operand '" + operand + "' must be rank 4, got " + ShapeToString(t.shape()));
  }
}

}  // namespace

ScopedOpCostSink::ScopedOpCostSink(OpCostSink* sink) : previous_(g_cost_sink) { g_cost_sink = sink; }
ScopedOpCostSink::~ScopedOpCostSink() { g_cost_sink = previous_; }

Var Conv2d(const Var& x, const Var& weight, const Var& bias, ConvGeometry geometry) {
  RequireFeatureMap(x.value(), "conv2d input");
  const Tensor& wt = weight.value();
  if (wt.rank() != 4) throw ShapeError("conv2d: weight must be rank 4, got " + ShapeToString(wt.shape()));
  const Tensor& xt = x.value();
  if (wt.dim(1) != xt.dim(1)) {
    throw ShapeError("conv2d: input has " + std::to_string(xt.dim(1)) + " channels but weight " +
                     ShapeToString(wt.shape()) + " expects " + std::to_string(wt.dim(1)));
  }
  if (geometry.stride < 1 || geometry.dilation < 1 || geometry.padding < 0) {
    throw ShapeError("conv2d: invalid stride/dilation/padding");
  }
  ConvDims d{xt.dim(0), xt.dim(1), xt.dim(2), xt.dim(3), wt.dim(0), wt.dim(2), wt.dim(3), 0, 0,
             geometry.stride, geometry.padding, geometry.dilation};
  d.h_out = (d.h + 2 * d.padding - d.dilation * (d.kh - 1) - 1) / d.stride + 1;
  d.w_out = (d.w + 2 * d.padding - d.dilation * (d.kw - 1) - 1) / d.stride + 1;
  if (d.h_out < 1 || d.w_out < 1) {
    throw ShapeError("conv2d: input " + ShapeToString(xt.shape()) + " too small for kernel " + ShapeToString(wt.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.value().size() != d.c_out)) {
    throw ShapeError("conv2d: bias " + ShapeToString(bias.value().shape()) + " does not match " +
                     std::to_string(d.c_out) + " output channels");
  }

  Tensor out(Shape{d.n, d.c_out, d.h_out, d.w_out});
  const std::int64_t plane = d.out_plane();
  ConstMatrixMap wm(wt.data(), d.c_out, d.patch());
  std::vector<double> cols;
  const std::int64_t chunk = d.rows_per_chunk();
  for (std::int64_t n = 0; n < d.n; ++n) {
    const double* xn = xt.data() + n * d.c_in * d.h * d.w;
    double* yn = out.data() + n * d.c_out * plane;
    if (d.pointwise()) {
      MatrixMap(yn, d.c_out, plane).noalias() = wm * ConstMatrixMap(xn, d.c_in, plane);
    } else {
      for (std::int64_t r0 = 0; r0 < d.h_out; r0 += chunk) {
        const std::int64_t rows = std::min(chunk, d.h_out - r0);
        const std::int64_t ncols = rows * d.w_out;
        cols.resize(static_cast<std::size_t>(d.patch() * ncols));
        Im2Col(d, xn, r0, rows, cols.data());
        StridedMap(yn + r0 * d.w_out, d.c_out, ncols, Eigen::OuterStride<>(plane)).noalias() =
            wm * ConstMatrixMap(cols.data(), d.patch(), ncols);
      }
    }
    if (has_bias) {
      for (std::int64_t c = 0; c < d.c_out; ++c) {
        const double b = bias.value()[c];
        double* p = yn + c * plane;
        for (std::int64_t i = 0; i < plane; ++i) p[i] += b;
      }
    }
  }
  const std::int64_t macs = d.n * d.c_out * plane * d.patch();
  RecordCost("conv2d", 2 * macs + (has_bias ? d.n * d.c_out * plane : 0), macs);

  return MakeResult(std::move(out), {x, weight, bias}, [d, has_bias](Node& self) {
    const Tensor& gy = self.grad;
    Node* xn = self.inputs[0].get();
    Node* wn = self.inputs[1].get();
    Node* bn = self.inputs[2].get();
    const std::int64_t plane = d.out_plane();
    ConstMatrixMap wm(wn->value.data(), d.c_out, d.patch());
    double* gw = wn->requires_grad ? wn->GradBuffer().data() : nullptr;
    double* gx = xn->requires_grad ? xn->GradBuffer().data() : nullptr;
    std::vector<double> cols;
    std::vector<double> gcols;
    const std::int64_t chunk = d.rows_per_chunk();
    for (std::int64_t n = 0; n < d.n; ++n) {
      const double* x_n = xn->value.data() + n * d.c_in * d.h * d.w;
      const double* gy_n = gy.data() + n * d.c_out * plane;
      if (d.pointwise()) {
        ConstMatrixMap gym(gy_n, d.c_out, plane);
        if (gw) MatrixMap(gw, d.c_out, d.patch()).noalias() += gym * ConstMatrixMap(x_n, d.c_in, plane).transpose();
        if (gx) MatrixMap(gx + n * d.c_in * plane, d.c_in, plane).noalias() += wm.transpose() * gym;
      } else {
        for (std::int64_t r0 = 0; r0 < d.h_out; r0 += chunk) {
          const std::int64_t rows = std::min(chunk, d.h_out - r0);
          const std::int64_t ncols = rows * d.w_out;
          ConstStridedMap gym(gy_n + r0 * d.w_out, d.c_out, ncols, Eigen::OuterStride<>(plane));
          if (gw) {
            cols.resize(static_cast<std::size_t>(d.patch() * ncols));
            Im2Col(d, x_n, r0, rows, cols.data());
            MatrixMap(gw, d.c_out, d.patch()).noalias() +=
                gym * ConstMatrixMap(cols.data(), d.patch(), ncols).transpose();
          }
          if (gx) {
            gcols.resize(static_cast<std::size_t>(d.patch() * ncols));
            MatrixMap(gcols.data(), d.patch(), ncols).noalias() = wm.transpose() * gym;
            Col2ImAdd(d, gcols.data(), r0, rows, gx + n * d.c_in * d.h * d.w);
          }
        }
      }
    }
    if (has_bias && bn->requires_grad) {
      Tensor& gb = bn->GradBuffer();
      for (std::int64_t n = 0; n < d.n; ++n) {
        for (std::int64_t c = 0; c < d.c_out; ++c) {
          const double* p = gy.data() + (n * d.c_out + c) * plane;
          double s = 0.0;
          for (std::int64_t i = 0; i < plane; ++i) s += p[i];
          gb[c] += s;
        }
      }
    }
  });
}

Var BatchNorm2d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
                bool training, double momentum, double eps) {
  RequireFeatureMap(x.value(), "batch_norm input");
  const Tensor& xt = x.value();
  const std::int64_t n = xt.dim(0), c = xt.dim(1), plane = xt.dim(2) * xt.dim(3);
  for (const Tensor* t : std::initializer_list<const Tensor*>{&gamma.value(), &beta.value(), &running_mean, &running_var}) {
    if (t->size() != c) {
      throw ShapeError("batch_norm: parameter " + ShapeToString(t->shape()) + " does not match " + std::to_string(c) +
                       " input channels");
    }
  }
  const std::int64_t count = n * plane;
  if (training && count < 2) {
    throw ValidationError("batch_norm: training-mode statistics need more than one value per channel (input " +
                          ShapeToString(xt.shape()) + ")");
  }

  std::vector<double> mean(c), inv_std(c);
  if (training) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const double* p = xt.data() + (i * c + ch) * plane;
        for (std::int64_t j = 0; j < plane; ++j) s += p[j];
      }
      const double m = s / static_cast<double>(count);
      double v = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const double* p = xt.data() + (i * c + ch) * plane;
        for (std::int64_t j = 0; j < plane; ++j) v += (p[j] - m) * (p[j] - m);
      }
      const double biased = v / static_cast<double>(count);
      mean[ch] = m;
      inv_std[ch] = 1.0 / std::sqrt(biased + eps);
      running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * m;
      running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * v / static_cast<double>(count - 1);
    }
  } else {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(running_var[ch] + eps);
    }
  }

  Tensor out(xt.shape());
  Tensor xhat(xt.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const std::int64_t off = (i * c + ch) * plane;
      const double g = gamma.value()[ch], b = beta.value()[ch];
      for (std::int64_t j = 0; j < plane; ++j) {
        const double h = (xt[off + j] - mean[ch]) * inv_std[ch];
        xhat[off + j] = h;
        out[off + j] = g * h + b;
      }
    }
  }
  RecordCost("batch_norm", cost::kBatchNorm * out.size());

  return MakeResult(std::move(out), {x, gamma, beta},
                    [xhat = std::move(xhat), inv_std = std::move(inv_std), training, n, c, plane](Node& self) {
                      const Tensor& gy = self.grad;
                      Node* xn = self.inputs[0].get();
                      Node* gn = self.inputs[1].get();
                      Node* bn = self.inputs[2].get();
                      const double count = static_cast<double>(n * plane);
                      for (std::int64_t ch = 0; ch < c; ++ch) {
                        double sum_g = 0.0, sum_gx = 0.0;
                        for (std::int64_t i = 0; i < n; ++i) {
                          const std::int64_t off = (i * c + ch) * plane;
                          for (std::int64_t j = 0; j < plane; ++j) {
                            sum_g += gy[off + j];
                            sum_gx += gy[off + j] * xhat[off + j];
                          }
                        }
                        if (gn->requires_grad) gn->GradBuffer()[ch] += sum_gx;
                        if (bn->requires_grad) bn->GradBuffer()[ch] += sum_g;
                        if (!xn->requires_grad) continue;
                        const double g = gn->value[ch];
                        Tensor& gx = xn->GradBuffer();
                        const double k = g * inv_std[ch];
                        for (std::int64_t i = 0; i < n; ++i) {
                          const std::int64_t off = (i * c + ch) * plane;
                          for (std::int64_t j = 0; j < plane; ++j) {
                            if (training) {
                              gx[off + j] += k * (gy[off + j] - sum_g / count - xhat[off + j] * sum_gx / count);
                            } else {
                              gx[off + j] += k * gy[off + j];
                            }
                          }
                        }
                      }
                    });
}

Var Relu(const Var& x) {
  Tensor out(x.shape());
  const Tensor& xt = x.value();
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = xt[i] > 0.0 ? xt[i] : 0.0;
  RecordCost("relu", cost::kRelu * out.size());
  return MakeResult(std::move(out), {x}, [](Node& self) {
    Tensor& gx = self.inputs[0]->GradBuffer();
    for (std::int64_t i = 0; i < gx.size(); ++i) {
      if (self.value[i] > 0.0) gx[i] += self.grad[i];
    }
  });
}

Var LeakyRelu(const Var& x, double negative_slope) {
  Tensor out(x.shape());
  const Tensor& xt = x.value();
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = xt[i] > 0.0 ? xt[i] : negative_slope * xt[i];
  RecordCost("leaky_relu", cost::kLeakyRelu * out.size());
  return MakeResult(std::move(out), {x}, [negative_slope](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    Tensor& gx = self.inputs[0]->GradBuffer();
    for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * (xv[i] > 0.0 ? 1.0 : negative_slope);
  });
}

Var Sigmoid(const Var& x) {
  Tensor out(x.shape());
  const Tensor& xt = x.value();
  for (std::int64_t i = 0; i < out.size(); ++i) {
    const double v = xt[i];
    // Split on sign so exp never overflows.
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  RecordCost("sigmoid", cost::kSigmoid * out.size());
  return MakeResult(std::move(out), {x}, [](Node& self) {
    Tensor& gx = self.inputs[0]->GradBuffer();
    for (std::int64_t i = 0; i < gx.size(); ++i) {
      const double y = self.value[i];
      gx[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Var Add(const Var& a, const Var& b) {
  RequireRank4(a.value(), "add", "a");
  RequireRank4(b.value(), "add", "b");
  Shape shape = BroadcastShape(a.shape(), b.shape(), "add");
  const auto sa = BroadcastStrides(a.shape(), shape);
  const auto sb = BroadcastStrides(b.shape(), shape);
  Tensor out(shape);
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  double* po = out.data();
  ForEachBroadcast(shape, sa, sb, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) { po[o] = pa[ia] + pb[ib]; });
  RecordCost("add", cost::kAdd * out.size());
  return MakeResult(std::move(out), {a, b}, [shape, sa, sb](Node& self) {
    Node* an = self.inputs[0].get();
    Node* bn = self.inputs[1].get();
    double* ga = an->requires_grad ? an->GradBuffer().data() : nullptr;
    double* gb = bn->requires_grad ? bn->GradBuffer().data() : nullptr;
    const double* g = self.grad.data();
    ForEachBroadcast(shape, sa, sb, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
      if (ga) ga[ia] += g[o];
      if (gb) gb[ib] += g[o];
    });
  });
}

Var Mul(const Var& a, const Var& b) {
  RequireRank4(a.value(), "mul", "a");
  RequireRank4(b.value(), "mul", "b");
  Shape shape = BroadcastShape(a.shape(), b.shape(), "mul");
  const auto sa = BroadcastStrides(a.shape(), shape);
  const auto sb = BroadcastStrides(b.shape(), shape);
  Tensor out(shape);
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  double* po = out.data();
  ForEachBroadcast(shape, sa, sb, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) { po[o] = pa[ia] * pb[ib]; });
  RecordCost("mul", cost::kMul * out.size());
  return MakeResult(std::move(out), {a, b}, [shape, sa, sb](Node& self) {
    Node* an = self.inputs[0].get();
    Node* bn = self.inputs[1].get();
    double* ga = an->requires_grad ? an->GradBuffer().data() : nullptr;
    double* gb = bn->requires_grad ? bn->GradBuffer().data() : nullptr;
    const double* va = an->value.data();
    const double* vb = bn->value.data();
    const double* g = self.grad.data();
    ForEachBroadcast(shape, sa, sb, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
      if (ga) ga[ia] += g[o] * vb[ib];
      if (gb) gb[ib] += g[o] * va[ia];
    });
  });
}

Var Scale(const Var& x, double factor) {
  Tensor out(x.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * factor;
  RecordCost("scale", cost::kMul * out.size());
  return MakeResult(std::move(out), {x}, [factor](Node& self) {
    Tensor& gx = self.inputs[0]->GradBuffer();
    for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * factor;
  });
}

Var ConcatChannels(const Var& a, const Var& b) {
  RequireFeatureMap(a.value(), "concat operand a");
  RequireFeatureMap(b.value(), "concat operand b");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
    throw ShapeError("concat: operands " + ShapeToString(sa) + " and " + ShapeToString(sb) +
                     " differ outside the channel axis");
  }
  const std::int64_t n = sa[0], ca = sa[1], cb = sb[1], plane = sa[2] * sa[3];
  Tensor out(Shape{n, ca + cb, sa[2], sa[3]});
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(a.value().data() + i * ca * plane, ca * plane, out.data() + i * (ca + cb) * plane);
    std::copy_n(b.value().data() + i * cb * plane, cb * plane, out.data() + (i * (ca + cb) + ca) * plane);
  }
  return MakeResult(std::move(out), {a, b}, [n, ca, cb, plane](Node& self) {
    Node* an = self.inputs[0].get();
    Node* bn = self.inputs[1].get();
    for (std::int64_t i = 0; i < n; ++i) {
      const double* g = self.grad.data() + i * (ca + cb) * plane;
      if (an->requires_grad) {
        double* ga = an->GradBuffer().data() + i * ca * plane;
        for (std::int64_t j = 0; j < ca * plane; ++j) ga[j] += g[j];
      }
      if (bn->requires_grad) {
        double* gb = bn->GradBuffer().data() + i * cb * plane;
        for (std::int64_t j = 0; j < cb * plane; ++j) gb[j] += g[ca * plane + j];
      }
    }
  });
}

Var SliceChannels(const Var& x, std::int64_t begin, std::int64_t count) {
  RequireFeatureMap(x.value(), "slice input");
  const Shape& s = x.shape();
  if (begin < 0 || count < 1 || begin + count > s[1]) {
    throw ShapeError("slice: channel range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside input " + ShapeToString(s));
  }
  const std::int64_t n = s[0], c = s[1], plane = s[2] * s[3];
  Tensor out(Shape{n, count, s[2], s[3]});
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(x.value().data() + (i * c + begin) * plane, count * plane, out.data() + i * count * plane);
  }
  return MakeResult(std::move(out), {x}, [n, c, plane, begin, count](Node& self) {
    Tensor& gx = self.inputs[0]->GradBuffer();
    for (std::int64_t i = 0; i < n; ++i) {
      const double* g = self.grad.data() + i * count * plane;
      double* dst = gx.data() + (i * c + begin) * plane;
      for (std::int64_t j = 0; j < count * plane; ++j) dst[j] += g[j];
    }
  });
}

Var MaxPool2d(const Var& x, int kernel, int stride, int padding) {
  RequireFeatureMap(x.value(), "max_pool input");
  const Tensor& xt = x.value();
  const std::int64_t n = xt.dim(0), c = xt.dim(1), h = xt.dim(2), w = xt.dim(3);
  const std::int64_t ho = (h + 2 * padding - kernel) / stride + 1;
  const std::int64_t wo = (w + 2 * padding - kernel) / stride + 1;
  if (ho < 1 || wo < 1) throw ShapeError("max_pool: input " + ShapeToString(xt.shape()) + " too small");
  Tensor out(Shape{n, c, ho, wo});
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(out.size()));
  std::int64_t o = 0;
  for (std::int64_t p = 0; p < n * c; ++p) {
    const double* plane = xt.data() + p * h * w;
    for (std::int64_t i = 0; i < ho; ++i) {
      for (std::int64_t j = 0; j < wo; ++j, ++o) {
        double best = -std::numeric_limits<double>::infinity();
        std::int64_t best_idx = -1;
        for (int ki = 0; ki < kernel; ++ki) {
          const std::int64_t ih = i * stride - padding + ki;
          if (ih < 0 || ih >= h) continue;
          for (int kj = 0; kj < kernel; ++kj) {
            const std::int64_t iw = j * stride - padding + kj;
            if (iw < 0 || iw >= w) continue;
            const double v = plane[ih * w + iw];
            if (v > best || best_idx < 0) {
              best = v;
              best_idx = p * h * w + ih * w + iw;
            }
          }
        }
        out[o] = best;
        argmax[static_cast<std::size_t>(o)] = best_idx;
      }
    }
  }
  RecordCost("max_pool", out.size() * kernel * kernel);
  return MakeResult(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    Tensor& gx = self.inputs[0]->GradBuffer();
    for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += self.grad[static_cast<std::int64_t>(i)];
  });
}

Var AvgPool2d(const Var& x, int factor) {
  RequireFeatureMap(x.value(), "avg_pool input");
  const Tensor& xt = x.value();
  const std::int64_t n = xt.dim(0), c = xt.dim(1), h = xt.dim(2), w = xt.dim(3);
  if (factor < 1 || h % factor != 0 || w % factor != 0) {
    throw ShapeError("avg_pool: input " + ShapeToString(xt.shape()) + " not divisible by factor " +
                     std::to_string(factor));
  }
  const std::int64_t ho = h / factor, wo = w / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  Tensor out(Shape{n, c, ho, wo});
  for (std::int64_t p = 0; p < n * c; ++p) {
    const double* plane = xt.data() + p * h * w;
    double* dst = out.data() + p * ho * wo;
    for (std::int64_t i = 0; i < h; ++i) {
      for (std::int64_t j = 0; j < w; ++j) dst[(i / factor) * wo + j / factor] += plane[i * w + j];
    }
    for (std::int64_t k = 0; k < ho * wo; ++k) dst[k] *= inv;
  }
  RecordCost("avg_pool", xt.size());
  return MakeResult(std::move(out), {x}, [n, c, h, w, ho, wo, factor, inv](Node& self) {
    Tensor& gx = self.inputs[0]->GradBuffer();
    for (std::int64_t p = 0; p < n * c; ++p) {
      const double* g = self.grad.data() + p * ho * wo;
      double* dst = gx.data() + p * h * w;
      for (std::int64_t i = 0; i < h; ++i) {
        for (std::int64_t j = 0; j < w; ++j) dst[i * w + j] += g[(i / factor) * wo + j / factor] * inv;
      }
    }
  });
}

Var GlobalAvgPool(const Var& x) {
  RequireFeatureMap(x.value(), "global_avg_pool input");
  const Tensor& xt = x.value();
  const std::int64_t n = xt.dim(0), c = xt.dim(1), plane = xt.dim(2) * xt.dim(3);
  Tensor out(Shape{n, c, 1, 1});
  for (std::int64_t p = 0; p < n * c; ++p) {
    double s = 0.0;
    const double* src = xt.data() + p * plane;
    for (std::int64_t j = 0; j < plane; ++j) s += src[j];
    out[p] = s / static_cast<double>(plane);
  }
  RecordCost("global_avg_pool", xt.size());
  return MakeResult(std::move(out), {x}, [n, c, plane](Node& self) {
    Tensor& gx = self.inputs[0]->GradBuffer();
    for (std::int64_t p = 0; p < n * c; ++p) {
      const double g = self.grad[p] / static_cast<double>(plane);
      double* dst = gx.data() + p * plane;
      for (std::int64_t j = 0; j < plane; ++j) dst[j] += g;
    }
  });
}

namespace {

struct LerpAxis {
  std::vector<std::int64_t> lo, hi;
  std::vector<double> frac;
};

// align_corners = false source coordinates, clamped at the low edge.
LerpAxis MakeLerpAxis(std::int64_t in, std::int64_t out) {
  LerpAxis axis;
  axis.lo.resize(static_cast<std::size_t>(out));
  axis.hi.resize(static_cast<std::size_t>(out));
  axis.frac.resize(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::int64_t>(src);
    if (lo > in - 1) lo = in - 1;
    const std::int64_t hi = std::min(lo + 1, in - 1);
    const auto k = static_cast<std::size_t>(i);
    axis.lo[k] = lo;
    axis.hi[k] = hi;
    // Clamped edges read one sample; a zero weight keeps the copy exact.
    axis.frac[k] = hi == lo ? 0.0 : src - static_cast<double>(lo);
  }
  return axis;
}

}  // namespace

Var UpsampleBilinear(const Var& x, std::int64_t out_h, std::int64_t out_w) {
  RequireFeatureMap(x.value(), "upsample input");
  if (out_h < 1 || out_w < 1) throw ShapeError("upsample: output size must be positive");
  const Tensor& xt = x.value();
  const std::int64_t n = xt.dim(0), c = xt.dim(1), h = xt.dim(2), w = xt.dim(3);
  LerpAxis ay = MakeLerpAxis(h, out_h);
  LerpAxis ax = MakeLerpAxis(w, out_w);
  Tensor out(Shape{n, c, out_h, out_w});
  for (std::int64_t p = 0; p < n * c; ++p) {
    const double* src = xt.data() + p * h * w;
    double* dst = out.data() + p * out_h * out_w;
    for (std::int64_t i = 0; i < out_h; ++i) {
      const auto ki = static_cast<std::size_t>(i);
      const double fy = ay.frac[ki];
      const double* r0 = src + ay.lo[ki] * w;
      const double* r1 = src + ay.hi[ki] * w;
      for (std::int64_t j = 0; j < out_w; ++j) {
        const auto kj = static_cast<std::size_t>(j);
        const double fx = ax.frac[kj];
        const double top = (1.0 - fx) * r0[ax.lo[kj]] + fx * r0[ax.hi[kj]];
        const double bot = (1.0 - fx) * r1[ax.lo[kj]] + fx * r1[ax.hi[kj]];
        dst[i * out_w + j] = (1.0 - fy) * top + fy * bot;
      }
    }
  }
  RecordCost("upsample_bilinear", cost::kBilinear * out.size());
  return MakeResult(std::move(out), {x}, [ay = std::move(ay), ax = std::move(ax), n, c, h, w, out_h, out_w](Node& self) {
    Tensor& gx = self.inputs[0]->GradBuffer();
    for (std::int64_t p = 0; p < n * c; ++p) {
      const double* g = self.grad.data() + p * out_h * out_w;
      double* dst = gx.data() + p * h * w;
      for (std::int64_t i = 0; i < out_h; ++i) {
        const auto ki = static_cast<std::size_t>(i);
        const double fy = ay.frac[ki];
        double* r0 = dst + ay.lo[ki] * w;
        double* r1 = dst + ay.hi[ki] * w;
        for (std::int64_t j = 0; j < out_w; ++j) {
          const auto kj = static_cast<std::size_t>(j);
          const double fx = ax.frac[kj];
          const double v = g[i * out_w + j];
          r0[ax.lo[kj]] += (1.0 - fy) * (1.0 - fx) * v;
          r0[ax.hi[kj]] += (1.0 - fy) * fx * v;
          r1[ax.lo[kj]] += fy * (1.0 - fx) * v;
          r1[ax.hi[kj]] += fy * fx * v;
        }
      }
    }
  });
}

Var SoftmaxChannels(const Var& x) {
  RequireFeatureMap(x.value(), "softmax input");
  const Tensor& xt = x.value();
  const std::int64_t n = xt.dim(0), c = xt.dim(1), plane = xt.dim(2) * xt.dim(3);
  Tensor out(xt.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < plane; ++j) {
      const std::int64_t base = i * c * plane + j;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::int64_t k = 0; k < c; ++k) mx = std::max(mx, xt[base + k * plane]);
      double s = 0.0;
      for (std::int64_t k = 0; k < c; ++k) {
        const double e = std::exp(xt[base + k * plane] - mx);
        out[base + k * plane] = e;
        s += e;
      }
      for (std::int64_t k = 0; k < c; ++k) out[base + k * plane] /= s;
    }
  }
  RecordCost("softmax", cost::kSoftmax * out.size());
  return MakeResult(std::move(out), {x}, [n, c, plane](Node& self) {
    Tensor& gx = self.inputs[0]->GradBuffer();
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < plane; ++j) {
        const std::int64_t base = i * c * plane + j;
        double dot = 0.0;
        for (std::int64_t k = 0; k < c; ++k) dot += self.grad[base + k * plane] * self.value[base + k * plane];
        for (std::int64_t k = 0; k < c; ++k) {
          const std::int64_t idx = base + k * plane;
          gx[idx] += self.value[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Var WeightedSum(const Var& x, const Tensor& weights) {
  if (weights.size() != x.value().size()) {
    throw ShapeError("weighted_sum: weights " + ShapeToString(weights.shape()) + " do not match input " +
                     ShapeToString(x.shape()));
  }
  double s = 0.0;
  for (std::int64_t i = 0; i < weights.size(); ++i) s += x.value()[i] * weights[i];
  return MakeResult(Tensor::Scalar(s), {x}, [weights](Node& self) {
    Tensor& gx = self.inputs[0]->GradBuffer();
    const double g = self.grad[0];
    for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += g * weights[i];
  });
}

}  // namespace dmanet
