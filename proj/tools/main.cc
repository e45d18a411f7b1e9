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
// Command-line entry point: train | eval | profile | predict.

#include <CLI11.hpp>

#include <iostream>

#include "commands.h"
#include "run_config.h"

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> overrides;
};

void AddCommon(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "Config file (key = value lines)")->required();
  cmd->add_option("--set", flags.overrides, "Override one key, e.g. --set train.total_iters=10");
}

dmanet::tools::RunConfig Resolve(const CommonFlags& flags) {
  dmanet::tools::RunConfig cfg = dmanet::tools::LoadRunConfig(flags.config);
  for (const auto& o : flags.overrides) dmanet::tools::ApplyOverride(cfg, o);
  dmanet::tools::ApplyEnvironment(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DMA-Net segmentation: training, evaluation, profiling and prediction"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, profile_flags, predict_flags;
  std::string resume, lambda_sweep;
  std::int64_t stop_after = -1;
  CLI::App* train = app.add_subcommand("train", "Train a model; optionally sweep the auxiliary loss weight");
  AddCommon(train, train_flags);
  train->add_option("--checkpoint", resume, "Resume from this checkpoint");
  train->add_option("--lambda-sweep", lambda_sweep, "Comma-separated auxiliary weights, one run each");
  train->add_option("--stop-after", stop_after, "Stop after N iterations (checkpoint kept for resuming)");

  std::string eval_checkpoint, eval_split;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate weights on a split");
  AddCommon(eval, eval_flags);
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint or exported weights")->required();
  eval->add_option("--split", eval_split, "Split to evaluate (default data.val_split)");

  std::string input_size;
  bool latency = false;
  int warmup = -1, iters = -1;
  CLI::App* profile = app.add_subcommand("profile", "Count params and FLOPs; optionally time inference");
  AddCommon(profile, profile_flags);
  profile->add_option("--input-size", input_size, "HxW, e.g. 1024x2048");
  profile->add_flag("--latency", latency, "Also benchmark inference latency");
  profile->add_option("--warmup", warmup, "Untimed warmup forwards");
  profile->add_option("--iters", iters, "Timed forwards");

  std::string predict_checkpoint, out_dir;
  std::vector<std::string> images;
  CLI::App* predict = app.add_subcommand("predict", "Write indexed-color masks for PNG images");
  AddCommon(predict, predict_flags);
  predict->add_option("--checkpoint", predict_checkpoint, "Checkpoint or exported weights")->required();
  predict->add_option("--out-dir", out_dir, "Mask directory (default <output.dir>/masks)");
  predict->add_option("images", images, "Input PNG files")->required();

  CLI11_PARSE(app, argc, argv);

  using namespace dmanet::tools;
  try {
    if (*train) {
      TrainOptions options;
      options.resume = resume;
      options.stop_after = stop_after;
      if (!lambda_sweep.empty()) options.lambda_sweep = ParseLambdaList(lambda_sweep);
      return CmdTrain(Resolve(train_flags), options, std::cout);
    }
    if (*eval) return CmdEval(Resolve(eval_flags), eval_checkpoint, eval_split, std::cout);
    if (*profile) {
      RunConfig cfg = Resolve(profile_flags);
      if (warmup >= 0) cfg.latency_warmup = warmup;
      if (iters >= 0) cfg.latency_iters = iters;
      ProfileOptions options;
      options.latency = latency;
      if (!input_size.empty()) options.input_size = ParseInputSize(input_size);
      return CmdProfile(cfg, options, std::cout);
    }
    return CmdPredict(Resolve(predict_flags), predict_checkpoint, images, out_dir, std::cout);
  } catch (const dmanet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
