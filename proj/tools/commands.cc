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
#include "commands.h"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "dmanet/encoder.h"
#include "dmanet/metrics.h"
#include "dmanet/png_io.h"
#include "dmanet/profiler.h"
#include "dmanet/trainer.h"

namespace dmanet::tools {
namespace fs = std::filesystem;
namespace {

void WriteTextFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

void PrepareOutputDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

void EchoConfig(const RunConfig& cfg) {
  PrepareOutputDir(cfg.output_dir);
  WriteTextFile(fs::path(cfg.output_dir) / kResolvedConfigFile, FormatRunConfig(cfg));
}

std::vector<std::string> ClassNames(const RunConfig& cfg) {
  const int k = cfg.model.num_classes;
  if (cfg.data_source == "files" && cfg.data_layout == "cityscapes" && k == 19) return CityscapesClassNames();
  if (cfg.data_source == "files" && cfg.data_layout == "camvid" && k == 11) return CamVidClassNames();
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i) names.push_back(fmt::format("class{}", i));
  return names;
}

DmaNetParams BuildModel(const RunConfig& cfg, std::ostream& log) {
  DmaNetParams model = BuildDmaNet(cfg.model, cfg.model_seed);
  if (!cfg.pretrained.empty()) {
    const LoadReport report = LoadPretrained(model.encoder, cfg.pretrained);
    fmt::print(log, "loaded {} encoder arrays from {} ({} unused)\n", report.loaded.size(), cfg.pretrained,
               report.unknown_keys.size());
  }
  return model;
}

ConfusionMatrix Evaluate(const DmaNetParams& model, const Dataset& data, const Normalization& norm) {
  ConfusionMatrix cm(model.config.num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample s = data.Get(i);
    LabelMap truth = s.label;
    cm.Update(PredictImage(model, s.image, norm), truth);
  }
  return cm;
}

// Keeps history rows before `start_iter` so a resumed run extends the trace.
void TruncateHistory(const fs::path& path, std::int64_t start_iter) {
  std::string kept = "iter,lr,loss\n";
  std::ifstream in(path);
  std::string line;
  bool header = true;
  while (in && std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find(','))) < start_iter) kept += line + "\n";
  }
  in.close();
  WriteTextFile(path, kept);
}

struct RunResult {
  double lambda = 0.0;
  double miou = 0.0;
  double pixel_accuracy = 0.0;
  bool finished = false;
};

RunResult TrainOne(const RunConfig& cfg, double lambda, const fs::path& dir, const TrainOptions& options,
                   const Dataset& train_set, const Dataset& val_set, std::ostream& log) {
  PrepareOutputDir(dir);
  DmaNetParams model = BuildModel(cfg, log);
  TrainConfig tc = cfg.train;
  tc.lambda = lambda;
  model.config.lambda = lambda;
  Trainer trainer(model, train_set, tc, cfg.aug, cfg.norm);

  const fs::path history_path = dir / kHistoryFile;
  if (!options.resume.empty()) {
    trainer.LoadCheckpoint(options.resume);
    fmt::print(log, "resumed from {} at iteration {}\n", options.resume, trainer.next_iter());
    TruncateHistory(history_path, trainer.next_iter());
  } else {
    WriteTextFile(history_path, "iter,lr,loss\n");
  }
  std::ofstream history(history_path, std::ios::app);
  if (!history) throw IoError("cannot append to '" + history_path.string() + "'");

  const fs::path checkpoint = dir / kCheckpointFile;
  std::int64_t ran = 0;
  while (!trainer.done() && (options.stop_after < 0 || ran < options.stop_after)) {
    const TrainRecord r = trainer.Step();
    ++ran;
    history << fmt::format("{},{:.17g},{:.17g}\n", r.iter, r.lr, r.loss) << std::flush;
    if (!history) throw IoError("cannot append to '" + history_path.string() + "'");
    if (cfg.checkpoint_every > 0 && (r.iter + 1) % cfg.checkpoint_every == 0) trainer.SaveCheckpoint(checkpoint.string());
    if (r.iter % 50 == 0 || trainer.done()) {
      fmt::print(log, "lambda {} iter {}/{} lr {:.6g} loss {:.6f}\n", lambda, r.iter + 1, tc.total_iters, r.lr, r.loss);
    }
  }
  trainer.SaveCheckpoint(checkpoint.string());

  RunResult result;
  result.lambda = lambda;
  if (!trainer.done()) {
    fmt::print(log, "stopped at iteration {}; resume with --checkpoint {}\n", trainer.next_iter(), checkpoint.string());
    return result;
  }
  ExportWeights((dir / kWeightsFile).string(), model);
  const ConfusionMatrix cm = Evaluate(model, val_set, cfg.norm);
  const std::string report =
      fmt::format("# lambda {}\n{}", lambda, FormatMetricReport(cm, ClassNames(cfg)));
  WriteTextFile(dir / kReportFile, report);
  log << report;
  result.miou = cm.MeanIou();
  result.pixel_accuracy = cm.PixelAccuracy();
  result.finished = true;
  return result;
}

std::string FormatLambda(double lambda) { return fmt::format("{}", lambda); }

}  // namespace

std::string LambdaRunDir(const std::string& output_dir, double lambda) {
  return (fs::path(output_dir) / ("lambda_" + FormatLambda(lambda))).string();
}

std::unique_ptr<Dataset> OpenDataset(const RunConfig& cfg, const std::string& split) {
  if (cfg.data_source == "toy") {
    ToySpec spec = cfg.toy;
    spec.num_classes = cfg.model.num_classes;
    return std::make_unique<InMemoryDataset>(MakeSyntheticToy(spec, cfg.toy_seed));
  }
  return std::make_unique<FileDataset>(LoadDataset(cfg.data_root, split, ParseLayout(cfg.data_layout)));
}

Tensor ReflectPad(const Tensor& chw, std::int64_t out_h, std::int64_t out_w) {
  const std::int64_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (out_h < h || out_w < w) throw ShapeError("reflect pad target is smaller than the image");
  auto reflect = [](std::int64_t i, std::int64_t n) {
    if (n == 1) return std::int64_t{0};
    const std::int64_t period = 2 * (n - 1);
    i %= period;
    return i < n ? i : period - i;
  };
  Tensor out(Shape{c, out_h, out_w});
  for (std::int64_t k = 0; k < c; ++k) {
    for (std::int64_t y = 0; y < out_h; ++y) {
      const std::int64_t sy = reflect(y, h);
      for (std::int64_t x = 0; x < out_w; ++x) out[(k * out_h + y) * out_w + x] = chw[(k * h + sy) * w + reflect(x, w)];
    }
  }
  return out;
}

LabelMap PredictImage(const DmaNetParams& model, const Tensor& chw, const Normalization& norm) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw ShapeError("expected a (3,H,W) image, got " + ShapeToString(chw.shape()));
  const std::int64_t m = ModelConfig::kInputMultiple;
  const std::int64_t h = chw.dim(1), w = chw.dim(2);
  const std::int64_t ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
  Sample s;
  s.image = ReflectPad(chw, ph, pw);
  s.label = LabelMap(1, ph, pw);
  const Batch batch = MakeBatch({s}, norm);
  const LabelMap full = Predict(model, batch.images);
  if (ph == h && pw == w) return full;
  LabelMap out(1, h, w);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) out.at(0, y, x) = full.at(0, y, x);
  }
  return out;
}

Palette ChoosePalette(const RunConfig& cfg) {
  const bool cityscapes = cfg.palette == "cityscapes" || (cfg.palette == "auto" && cfg.model.num_classes == 19);
  if (cityscapes) {
    if (cfg.model.num_classes > 19) throw ConfigError("the Cityscapes palette covers 19 classes");
    return CityscapesPalette();
  }
  return ToyPalette(cfg.model.num_classes);
}

std::pair<std::int64_t, std::int64_t> ParseInputSize(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument("no separator");
    std::size_t used_h = 0, used_w = 0;
    const std::string hs = text.substr(0, x), ws = text.substr(x + 1);
    const std::int64_t h = std::stoll(hs, &used_h), w = std::stoll(ws, &used_w);
    if (used_h != hs.size() || used_w != ws.size() || h <= 0 || w <= 0) throw std::invalid_argument("bad size");
    return {h, w};
  } catch (const std::exception&) {
    throw ConfigError("input size '" + text + "' is not HxW");
  }
}

std::vector<double> ParseLambdaList(const std::string& text) {
  RunConfig scratch;
  ApplyOverride(scratch, "train.lambda_sweep=" + text);
  return scratch.lambda_sweep;
}

int CmdTrain(const RunConfig& cfg, const TrainOptions& options, std::ostream& log) {
  cfg.Validate();
  const std::vector<double> sweep = options.lambda_sweep.empty() ? cfg.lambda_sweep : options.lambda_sweep;
  for (double l : sweep) {
    if (!(l >= 0.0)) throw ConfigError(fmt::format("lambda sweep value {} is negative", l));
  }
  if (!options.resume.empty() && sweep.size() > 1) throw ConfigError("--checkpoint resumes a single run, not a sweep");
  EchoConfig(cfg);

  const auto train_set = OpenDataset(cfg, cfg.train_split);
  const auto val_set = OpenDataset(cfg, cfg.val_split);
  fmt::print(log, "train samples {}, val samples {}\n", train_set->size(), val_set->size());

  if (sweep.empty()) {
    TrainOne(cfg, cfg.train.lambda, cfg.output_dir, options, *train_set, *val_set, log);
    return 0;
  }
  std::string summary = "lambda mIoU pixel_accuracy\n";
  for (double lambda : sweep) {
    const RunResult r = TrainOne(cfg, lambda, LambdaRunDir(cfg.output_dir, lambda), options, *train_set, *val_set, log);
    if (!r.finished) return 0;
    summary += fmt::format("{} {:.4f} {:.4f}\n", FormatLambda(lambda), r.miou, r.pixel_accuracy);
  }
  WriteTextFile(fs::path(cfg.output_dir) / kSweepSummaryFile, summary);
  log << summary;
  return 0;
}

int CmdEval(const RunConfig& cfg, const std::string& checkpoint, const std::string& split, std::ostream& log) {
  cfg.Validate();
  if (checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
  EchoConfig(cfg);
  DmaNetParams model = BuildDmaNet(cfg.model, cfg.model_seed);
  LoadModelWeights(checkpoint, model);
  const auto data = OpenDataset(cfg, split.empty() ? cfg.val_split : split);
  const ConfusionMatrix cm = Evaluate(model, *data, cfg.norm);
  const std::string report = FormatMetricReport(cm, ClassNames(cfg));
  WriteTextFile(fs::path(cfg.output_dir) / kReportFile, report);
  log << report;
  return 0;
}

int CmdProfile(const RunConfig& cfg, const ProfileOptions& options, std::ostream& log) {
  RunConfig resolved = cfg;
  if (options.input_size) {
    resolved.profile_h = options.input_size->first;
    resolved.profile_w = options.input_size->second;
  }
  resolved.Validate();
  EchoConfig(resolved);
  ProfileReport report = CountFlops(resolved.model, resolved.profile_h, resolved.profile_w, resolved.profile_aux);
  if (options.latency) {
    const DmaNetParams model = BuildDmaNet(resolved.model, resolved.model_seed);
    report.latency = BenchmarkLatency(model, resolved.profile_h, resolved.profile_w, resolved.latency_warmup,
                                      resolved.latency_iters);
  }
  const std::string text = FormatProfileReport(report);
  WriteTextFile(fs::path(resolved.output_dir) / kProfileFile, text);
  WriteTextFile(fs::path(resolved.output_dir) / kProfileKvFile, FormatProfileKeyValues(report));
  log << text;
  return 0;
}

int CmdPredict(const RunConfig& cfg, const std::string& checkpoint, const std::vector<std::string>& images,
               const std::string& out_dir, std::ostream& log) {
  cfg.Validate();
  if (checkpoint.empty()) throw ConfigError("predict needs --checkpoint");
  if (images.empty()) throw ConfigError("predict needs at least one image path");
  const fs::path dir = out_dir.empty() ? fs::path(cfg.output_dir) / "masks" : fs::path(out_dir);
  EchoConfig(cfg);
  PrepareOutputDir(dir);
  DmaNetParams model = BuildDmaNet(cfg.model, cfg.model_seed);
  LoadModelWeights(checkpoint, model);
  const Palette palette = ChoosePalette(cfg);

  int failures = 0;
  for (const auto& path : images) {
    try {
      const Image8 rgb = ReadPngRgb(path);
      const LabelMap labels = PredictImage(model, Rgb8ToImage(rgb), cfg.norm);
      Image8 mask{labels.height, labels.width, 1, labels.data};
      const std::string stem = fs::path(path).stem().string();
      WritePngIndexed((dir / (stem + "_mask.png")).string(), mask, palette);
      if (cfg.predict_composite) {
        Image8 composite{rgb.height, rgb.width * 2, 3, {}};
        composite.data.resize(static_cast<std::size_t>(composite.height * composite.width * 3));
        for (std::int64_t y = 0; y < rgb.height; ++y) {
          for (std::int64_t x = 0; x < rgb.width; ++x) {
            const auto src = static_cast<std::size_t>((y * rgb.width + x) * 3);
            const auto left = static_cast<std::size_t>((y * composite.width + x) * 3);
            const auto right = static_cast<std::size_t>((y * composite.width + rgb.width + x) * 3);
            const Rgb& color = palette[labels.at(0, y, x)];
            for (std::size_t c = 0; c < 3; ++c) {
              composite.data[left + c] = rgb.data[src + c];
              composite.data[right + c] = color[c];
            }
          }
        }
        WritePngRgb((dir / (stem + "_composite.png")).string(), composite);
      }
      fmt::print(log, "wrote {}\n", (dir / (stem + "_mask.png")).string());
    } catch (const std::exception& e) {
      ++failures;
      fmt::print(log, "error: {}: {}\n", path, e.what());
    }
  }
  fmt::print(log, "{} of {} images written\n", images.size() - static_cast<std::size_t>(failures), images.size());
  return failures == 0 ? 0 : 1;
}

}  // namespace dmanet::tools
