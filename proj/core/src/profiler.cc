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
#include "dmanet/profiler.h"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>
#include <unordered_map>

namespace dmanet {
namespace {

struct MapShape {
  std::int64_t c = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::int64_t size() const { return c * h * w; }
};

// Mirrors the forward graph shape by shape, charging each op to a named row.
class CostWalk {
 public:
  ProfileRow& Row(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return rows_[it->second];
    index_[name] = rows_.size();
    rows_.push_back({name, 0, 0, 0});
    return rows_.back();
  }

  MapShape Conv(const std::string& name, const MapShape& in, std::int64_t c_out, std::int64_t k, std::int64_t stride,
                std::int64_t pad, std::int64_t dilation, bool bias) {
    const MapShape out{c_out, (in.h + 2 * pad - dilation * (k - 1) - 1) / stride + 1,
                       (in.w + 2 * pad - dilation * (k - 1) - 1) / stride + 1};
    const std::int64_t macs = out.size() * in.c * k * k;
    ProfileRow& r = Row(name);
    r.params += c_out * in.c * k * k + (bias ? c_out : 0);
    r.macs += macs;
    r.flops += 2 * macs + (bias ? out.size() : 0);
    return out;
  }
  MapShape BatchNorm(const std::string& name, const MapShape& x) {
    ProfileRow& r = Row(name);
    r.params += 2 * x.c;
    r.flops += cost::kBatchNorm * x.size();
    return x;
  }
  MapShape Elementwise(const std::string& name, const MapShape& x, std::int64_t per_element) {
    Row(name).flops += per_element * x.size();
    return x;
  }
  MapShape MaxPool(const std::string& name, const MapShape& x, std::int64_t k, std::int64_t stride, std::int64_t pad) {
    const MapShape out{x.c, (x.h + 2 * pad - k) / stride + 1, (x.w + 2 * pad - k) / stride + 1};
    Row(name).flops += out.size() * k * k;
    return out;
  }
  MapShape AvgPool(const std::string& name, const MapShape& x, std::int64_t factor) {
    Row(name).flops += x.size();
    return {x.c, x.h / factor, x.w / factor};
  }
  MapShape GlobalPool(const std::string& name, const MapShape& x) {
    Row(name).flops += x.size();
    return {x.c, 1, 1};
  }
  MapShape Upsample(const std::string& name, const MapShape& x, std::int64_t h, std::int64_t w) {
    const MapShape out{x.c, h, w};
    Row(name).flops += cost::kBilinear * out.size();
    return out;
  }
  // Parameters that exist but are not exercised by this walk.
  void ParamsOnly(const std::string& name, std::int64_t count) { Row(name).params += count; }

  std::vector<ProfileRow> TakeRows() { return std::move(rows_); }

 private:
  std::vector<ProfileRow> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

MapShape Cbr(CostWalk& walk, const std::string& name, const MapShape& x, std::int64_t c_out, std::int64_t k) {
  MapShape y = walk.Conv(name + ".conv", x, c_out, k, 1, (k - 1) / 2, 1, false);
  walk.BatchNorm(name + ".bn", y);
  return walk.Elementwise(name + ".relu", y, cost::kRelu);
}

MapShape Block(CostWalk& walk, const std::string& name, const MapShape& x, std::int64_t c_out, std::int64_t stride) {
  MapShape y = walk.Conv(name + ".conv1", x, c_out, 3, stride, 1, 1, false);
  walk.BatchNorm(name + ".bn1", y);
  walk.Elementwise(name + ".relu1", y, cost::kRelu);
  y = walk.Conv(name + ".conv2", y, c_out, 3, 1, 1, 1, false);
  walk.BatchNorm(name + ".bn2", y);
  if (stride != 1 || x.c != c_out) {
    MapShape s = walk.Conv(name + ".downsample.conv", x, c_out, 1, stride, 0, 1, false);
    walk.BatchNorm(name + ".downsample.bn", s);
  }
  walk.Elementwise(name + ".add", y, cost::kAdd);
  return walk.Elementwise(name + ".relu2", y, cost::kRelu);
}

// Lattice combine: seven element-wise ops per output element.
void Lattice(CostWalk& walk, const std::string& name, const MapShape& x) {
  walk.Elementwise(name, x, 2 * cost::kMul + 3 * cost::kAdd + 2 * cost::kRelu);
}

MapShape Wlb(CostWalk& walk, const std::string& name, const MapShape& x) {
  MapShape s = walk.Conv(name + ".conv", x, 2, 1, 1, 0, 1, true);
  return walk.Elementwise(name + ".sigmoid", s, cost::kSigmoid);
}

MapShape Branch(CostWalk& walk, const std::string& name, const MapShape& tap, const MapShape& f4, std::int64_t c,
                int pool_factor, const std::array<int, 2>& rates) {
  MapShape z = Cbr(walk, name + ".cbr1", tap, c, 3);
  z = Cbr(walk, name + ".cbr2", z, c, 3);
  MapShape m = walk.AvgPool(name + ".f4_pool", f4, pool_factor);
  m = Cbr(walk, name + ".m_adapter", m, f4.c, 3);

  const std::string lerb = name + ".lerb";
  MapShape cx = walk.Conv(lerb + ".ctx.conv1", z, c, 3, 1, rates[0], rates[0], false);
  walk.BatchNorm(lerb + ".ctx.bn1", cx);
  walk.Elementwise(lerb + ".ctx.relu", cx, cost::kRelu);
  cx = walk.Conv(lerb + ".ctx.conv2", cx, c, 3, 1, rates[1], rates[1], false);
  walk.BatchNorm(lerb + ".ctx.bn2", cx);
  Wlb(walk, lerb + ".wlb_c", z);
  Lattice(walk, lerb + ".lattice_c", z);

  const MapShape cat{c + m.c, z.h, z.w};
  MapShape s = walk.Conv(lerb + ".spatial.conv", cat, c, 3, 1, 1, 1, false);
  walk.BatchNorm(lerb + ".spatial.bn", s);
  Wlb(walk, lerb + ".wlb_s", z);
  Lattice(walk, lerb + ".lattice_s", z);

  return Cbr(walk, name + ".post", {2 * c, z.h, z.w}, c, 3);
}

MapShape Ftb(CostWalk& walk, const std::string& name, const MapShape& x, std::int64_t c) {
  MapShape xf = Cbr(walk, name + ".cbr", x, c, 3);
  MapShape xs = walk.Conv(name + ".spatial", xf, 1, 1, 1, 0, 1, true);
  walk.Elementwise(name + ".spatial_act", xs, cost::kLeakyRelu);
  MapShape xg = walk.GlobalPool(name + ".pool", xf);
  MapShape xc = walk.Conv(name + ".channel.conv", xg, c, 1, 1, 0, 1, false);
  walk.BatchNorm(name + ".channel.bn", xc);
  walk.Elementwise(name + ".channel.relu", xc, cost::kRelu);
  xc = walk.Conv(name + ".channel.linear", xc, c, 1, 1, 0, 1, true);
  MapShape vw = walk.Conv(name + ".weight", xg, 2, 1, 1, 0, 1, true);
  walk.Elementwise(name + ".weight_softmax", vw, cost::kSoftmax);
  // Fusing the two heads into T, then applying T to X_f.
  walk.Elementwise(name + ".fuse", xs, cost::kMul);
  walk.Elementwise(name + ".fuse", xc, cost::kMul);
  walk.Elementwise(name + ".fuse", xf, cost::kAdd + cost::kSigmoid + cost::kMul);
  return xf;
}

}  // namespace

std::vector<ProfileRow> CountParams(DmaNetParams& model) {
  std::vector<ProfileRow> rows;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& p : CollectParams(model).params) {
    const std::string layer = p.name.substr(0, p.name.rfind('.'));
    auto [it, inserted] = index.emplace(layer, rows.size());
    if (inserted) rows.push_back({layer, 0, 0, 0});
    rows[it->second].params += p.var.value().size();
  }
  return rows;
}

ProfileReport CountFlops(const ModelConfig& config, std::int64_t h, std::int64_t w, bool with_aux) {
  config.Validate();
  if (h < ModelConfig::kInputMultiple || w < ModelConfig::kInputMultiple || h % ModelConfig::kInputMultiple != 0 ||
      w % ModelConfig::kInputMultiple != 0) {
    throw ShapeError(fmt::format("profile input {}x{} must be a positive multiple of {}", h, w,
                                 ModelConfig::kInputMultiple));
  }
  const auto widths = config.EncoderWidths();
  const std::int64_t c = config.DecoderWidth();
  const std::int64_t k = config.num_classes;
  CostWalk walk;

  MapShape x = walk.Conv("stem.conv", {3, h, w}, widths[0], 7, 2, 3, 1, false);
  walk.BatchNorm("stem.bn", x);
  walk.Elementwise("stem.relu", x, cost::kRelu);
  x = walk.MaxPool("stem.maxpool", x, 3, 2, 1);
  std::array<MapShape, 4> taps;
  for (int s = 0; s < 4; ++s) {
    const std::string sub = fmt::format("sub{}", s + 1);
    x = Block(walk, sub + ".block1", x, widths[s], s == 0 ? 1 : 2);
    x = Block(walk, sub + ".block2", x, widths[s], 1);
    taps[s] = x;
  }

  const MapShape lb = Branch(walk, "lb", taps[1], taps[0], c, 2, config.atrous_rates);
  const MapShape mb = Branch(walk, "mb", taps[2], taps[0], c, 4, config.atrous_rates);
  const MapShape hb = Branch(walk, "hb", taps[3], taps[0], c, 8, config.atrous_rates);

  MapShape g = walk.GlobalPool("gcb.pool", taps[3]);
  g = walk.Conv("gcb.cbr.conv", g, c, 1, 1, 0, 1, false);
  walk.BatchNorm("gcb.cbr.bn", g);
  walk.Elementwise("gcb.cbr.relu", g, cost::kRelu);
  walk.Upsample("gcb.upsample", g, taps[3].h, taps[3].w);
  walk.Elementwise("agg.hb", hb, cost::kAdd);

  MapShape t = Ftb(walk, "ftb.hb_mb", hb, c);
  walk.Upsample("agg.mb.upsample", t, mb.h, mb.w);
  walk.Elementwise("agg.mb", mb, cost::kAdd);
  t = Ftb(walk, "ftb.mb_lb", mb, c);
  walk.Upsample("agg.lb.upsample", t, lb.h, lb.w);
  walk.Elementwise("agg.lb", lb, cost::kAdd);

  MapShape logits = walk.Conv("heads.principal", lb, k, 1, 1, 0, 1, true);
  walk.Upsample("heads.principal.upsample", logits, h, w);
  if (with_aux) {
    logits = walk.Conv("heads.mid", mb, k, 1, 1, 0, 1, true);
    walk.Upsample("heads.mid.upsample", logits, h, w);
    logits = walk.Conv("heads.high", hb, k, 1, 1, 0, 1, true);
    walk.Upsample("heads.high.upsample", logits, h, w);
  } else {
    walk.ParamsOnly("heads.mid", c * k + k);
    walk.ParamsOnly("heads.high", c * k + k);
  }

  ProfileReport report;
  report.input_h = h;
  report.input_w = w;
  report.rows = walk.TakeRows();
  for (const auto& r : report.rows) {
    report.total_params += r.params;
    report.total_flops += r.flops;
    report.total_macs += r.macs;
  }
  return report;
}

void OpCostTally::Record(const std::string& op, std::int64_t op_flops, std::int64_t op_macs) {
  flops_by_op[op] += op_flops;
  flops += op_flops;
  macs += op_macs;
}

OpCostTally MeasureForwardCost(const DmaNetParams& model, std::int64_t h, std::int64_t w, bool with_aux) {
  OpCostTally tally;
  NoGradGuard no_grad;
  ScopedOpCostSink scope(&tally);
  DmaForward(model, Var::Constant(Tensor(Shape{1, 3, h, w})), ForwardOptions{false, with_aux, nullptr});
  return tally;
}

LatencyStats BenchmarkLatency(const DmaNetParams& model, std::int64_t h, std::int64_t w, int warmup, int iters) {
  if (iters < 1) throw ConfigError("latency iterations must be >= 1");
  if (warmup < 0) throw ConfigError("latency warmup must be >= 0");
  Tensor image(Shape{1, 3, h, w});
  Rng rng(0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : image.values()) v = normal(rng);
  const Var input = Var::Constant(std::move(image));
  NoGradGuard no_grad;
  const ForwardOptions options{false, false, nullptr};
  for (int i = 0; i < warmup; ++i) DmaForward(model, input, options);

  std::vector<double> times_ms;
  times_ms.reserve(static_cast<std::size_t>(iters));
  for (int i = 0; i < iters; ++i) {
    const auto start = std::chrono::steady_clock::now();
    DmaForward(model, input, options);
    const auto stop = std::chrono::steady_clock::now();
    times_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  double mean = 0.0;
  for (double t : times_ms) mean += t;
  mean /= static_cast<double>(iters);
  double var = 0.0;
  for (double t : times_ms) var += (t - mean) * (t - mean);
  var /= static_cast<double>(iters);

  LatencyStats stats;
  stats.mean_ms = mean;
  stats.std_ms = std::sqrt(var);
  stats.fps = 1000.0 / mean;
  stats.warmup = warmup;
  stats.iters = iters;
  stats.input_h = h;
  stats.input_w = w;
  stats.hardware = HardwareDescription();
  return stats;
}

std::string HardwareDescription() {
  std::string model = "unknown CPU";
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(line.find_first_not_of(" \t", colon + 1));
      break;
    }
  }
  return fmt::format("{} ({} logical cores)", model, std::thread::hardware_concurrency());
}

std::string FormatProfileReport(const ProfileReport& report) {
  std::string out;
  out += "# dmanet profile v1\n";
  out += fmt::format("# cost table: {}\n", kCostTableDescription);
  out += fmt::format("input {}x{}\n", report.input_h, report.input_w);
  out += fmt::format("{:<40} {:>12} {:>16} {:>16}\n", "layer", "params", "flops", "macs");
  for (const auto& r : report.rows) {
    out += fmt::format("{:<40} {:>12} {:>16} {:>16}\n", r.name, r.params, r.flops, r.macs);
  }
  out += fmt::format("total params={} ({:.2f}M) flops={} ({:.2f}G) macs={} ({:.2f}G)\n", report.total_params,
                     report.total_params / 1e6, report.total_flops, report.total_flops / 1e9, report.total_macs,
                     report.total_macs / 1e9);
  if (report.latency) {
    const LatencyStats& l = *report.latency;
    out += fmt::format("latency input={}x{} warmup={} iters={} mean_ms={:.3f} std_ms={:.3f} fps={:.3f} hardware=\"{}\"\n",
                       l.input_h, l.input_w, l.warmup, l.iters, l.mean_ms, l.std_ms, l.fps, l.hardware);
  }
  return out;
}

std::string FormatProfileKeyValues(const ProfileReport& report) {
  std::string out;
  out += fmt::format("input_h={}\ninput_w={}\n", report.input_h, report.input_w);
  out += fmt::format("total.params={}\ntotal.flops={}\ntotal.macs={}\n", report.total_params, report.total_flops,
                     report.total_macs);
  for (const auto& r : report.rows) {
    out += fmt::format("layer.{}.params={}\nlayer.{}.flops={}\nlayer.{}.macs={}\n", r.name, r.params, r.name, r.flops,
                       r.name, r.macs);
  }
  if (report.latency) {
    const LatencyStats& l = *report.latency;
    out += fmt::format("latency.mean_ms={:.6f}\nlatency.std_ms={:.6f}\nlatency.fps={:.6f}\n", l.mean_ms, l.std_ms,
                       l.fps);
    out += fmt::format("latency.warmup={}\nlatency.iters={}\nlatency.input_h={}\nlatency.input_w={}\n", l.warmup,
                       l.iters, l.input_h, l.input_w);
    out += fmt::format("latency.hardware={}\n", l.hardware);
  }
  return out;
}

}  // namespace dmanet
