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
#include "run_config.h"

#include <fmt/format.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace dmanet::tools {
namespace {

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(Trim(item));
  return out;
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, value));
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError(fmt::format("{}: '{}' is not true or false", key, value));
}

std::vector<double> ParseDoubles(const std::string& key, const std::string& value) {
  std::vector<double> out;
  if (Trim(value).empty()) return out;
  for (const auto& item : SplitList(value)) out.push_back(ParseNumber<double>(key, item));
  return out;
}

std::array<double, 3> ParseTriple(const std::string& key, const std::string& value) {
  const auto v = ParseDoubles(key, value);
  if (v.size() != 3) throw ConfigError(fmt::format("{}: expected 3 comma-separated values, got '{}'", key, value));
  return {v[0], v[1], v[2]};
}

std::string JoinDoubles(const double* v, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? "," : "") + fmt::format("{}", v[i]);
  return out;
}

struct KeySpec {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
KeySpec Number(std::string key, T RunConfig::*field) {
  return {key, [key, field](RunConfig& c, const std::string& v) { c.*field = ParseNumber<T>(key, v); },
          [field](const RunConfig& c) { return fmt::format("{}", c.*field); }};
}

template <typename T, typename Sub>
KeySpec Nested(std::string key, Sub RunConfig::*sub, T Sub::*field) {
  return {key, [key, sub, field](RunConfig& c, const std::string& v) { (c.*sub).*field = ParseNumber<T>(key, v); },
          [sub, field](const RunConfig& c) { return fmt::format("{}", (c.*sub).*field); }};
}

KeySpec Text(std::string key, std::string RunConfig::*field) {
  return {key, [field](RunConfig& c, const std::string& v) { c.*field = v; },
          [field](const RunConfig& c) { return c.*field; }};
}

KeySpec Flag(std::string key, bool RunConfig::*field) {
  return {key, [key, field](RunConfig& c, const std::string& v) { c.*field = ParseBool(key, v); },
          [field](const RunConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

const std::vector<KeySpec>& Keys() {
  static const std::vector<KeySpec> keys = [] {
    std::vector<KeySpec> k;
    k.push_back(Nested("model.num_classes", &RunConfig::model, &ModelConfig::num_classes));
    k.push_back(Nested("model.branch_width", &RunConfig::model, &ModelConfig::branch_width));
    k.push_back(Nested("model.width_divisor", &RunConfig::model, &ModelConfig::width_divisor));
    k.push_back({"model.atrous_rates",
                 [](RunConfig& c, const std::string& v) {
                   const auto items = SplitList(v);
                   if (items.size() != 2) throw ConfigError("model.atrous_rates: expected two rates, got '" + v + "'");
                   c.model.atrous_rates = {ParseNumber<int>("model.atrous_rates", items[0]),
                                           ParseNumber<int>("model.atrous_rates", items[1])};
                 },
                 [](const RunConfig& c) {
                   return fmt::format("{},{}", c.model.atrous_rates[0], c.model.atrous_rates[1]);
                 }});
    k.push_back(Number("model.seed", &RunConfig::model_seed));
    k.push_back(Text("model.pretrained", &RunConfig::pretrained));

    k.push_back(Nested("train.base_lr", &RunConfig::train, &TrainConfig::base_lr));
    k.push_back(Nested("train.momentum", &RunConfig::train, &TrainConfig::momentum));
    k.push_back(Nested("train.weight_decay", &RunConfig::train, &TrainConfig::weight_decay));
    k.push_back(Nested("train.power", &RunConfig::train, &TrainConfig::power));
    k.push_back(Nested("train.total_iters", &RunConfig::train, &TrainConfig::total_iters));
    k.push_back(Nested("train.batch_size", &RunConfig::train, &TrainConfig::batch_size));
    k.push_back(Nested("train.lambda", &RunConfig::train, &TrainConfig::lambda));
    k.push_back(Nested("train.seed", &RunConfig::train, &TrainConfig::seed));
    k.push_back(Number("train.checkpoint_every", &RunConfig::checkpoint_every));
    k.push_back({"train.lambda_sweep",
                 [](RunConfig& c, const std::string& v) { c.lambda_sweep = ParseDoubles("train.lambda_sweep", v); },
                 [](const RunConfig& c) { return JoinDoubles(c.lambda_sweep.data(), c.lambda_sweep.size()); }});
    k.push_back({"ohem.prob_threshold",
                 [](RunConfig& c, const std::string& v) {
                   c.train.ohem.prob_threshold = ParseNumber<double>("ohem.prob_threshold", v);
                 },
                 [](const RunConfig& c) { return fmt::format("{}", c.train.ohem.prob_threshold); }});
    k.push_back({"ohem.min_keep_fraction",
                 [](RunConfig& c, const std::string& v) {
                   c.train.ohem.min_keep_fraction = ParseNumber<double>("ohem.min_keep_fraction", v);
                 },
                 [](const RunConfig& c) { return fmt::format("{}", c.train.ohem.min_keep_fraction); }});

    k.push_back(Nested("aug.hflip_prob", &RunConfig::aug, &AugConfig::hflip_prob));
    k.push_back(Nested("aug.scale_min", &RunConfig::aug, &AugConfig::scale_min));
    k.push_back(Nested("aug.scale_max", &RunConfig::aug, &AugConfig::scale_max));
    k.push_back(Nested("aug.crop_h", &RunConfig::aug, &AugConfig::crop_h));
    k.push_back(Nested("aug.crop_w", &RunConfig::aug, &AugConfig::crop_w));
    k.push_back({"aug.pad_image",
                 [](RunConfig& c, const std::string& v) { c.aug.pad_image = ParseTriple("aug.pad_image", v); },
                 [](const RunConfig& c) { return JoinDoubles(c.aug.pad_image.data(), 3); }});
    k.push_back({"norm.mean", [](RunConfig& c, const std::string& v) { c.norm.mean = ParseTriple("norm.mean", v); },
                 [](const RunConfig& c) { return JoinDoubles(c.norm.mean.data(), 3); }});
    k.push_back({"norm.std", [](RunConfig& c, const std::string& v) { c.norm.std = ParseTriple("norm.std", v); },
                 [](const RunConfig& c) { return JoinDoubles(c.norm.std.data(), 3); }});

    k.push_back(Text("data.source", &RunConfig::data_source));
    k.push_back(Text("data.layout", &RunConfig::data_layout));
    k.push_back(Text("data.root", &RunConfig::data_root));
    k.push_back(Text("data.train_split", &RunConfig::train_split));
    k.push_back(Text("data.val_split", &RunConfig::val_split));
    k.push_back(Nested("toy.n_images", &RunConfig::toy, &ToySpec::n_images));
    k.push_back(Nested("toy.height", &RunConfig::toy, &ToySpec::height));
    k.push_back(Nested("toy.width", &RunConfig::toy, &ToySpec::width));
    k.push_back(Number("toy.seed", &RunConfig::toy_seed));

    k.push_back(Text("output.dir", &RunConfig::output_dir));

    k.push_back(Number("profile.input_h", &RunConfig::profile_h));
    k.push_back(Number("profile.input_w", &RunConfig::profile_w));
    k.push_back(Flag("profile.aux_heads", &RunConfig::profile_aux));
    k.push_back(Number("profile.warmup", &RunConfig::latency_warmup));
    k.push_back(Number("profile.iters", &RunConfig::latency_iters));

    k.push_back(Text("predict.palette", &RunConfig::palette));
    k.push_back(Flag("predict.composite", &RunConfig::predict_composite));
    return k;
  }();
  return keys;
}

void SetKey(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& spec : Keys()) {
    if (spec.key == key) {
      spec.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void Sync(RunConfig& cfg) {
  cfg.model.lambda = cfg.train.lambda;
  cfg.toy.num_classes = cfg.model.num_classes;
}

}  // namespace

void RunConfig::Validate() const {
  model.Validate();
  train.Validate();
  aug.Validate();
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  for (double l : lambda_sweep) {
    if (!(l >= 0.0)) throw ConfigError(fmt::format("train.lambda_sweep: {} is negative", l));
  }
  for (double s : norm.std) {
    if (!(s > 0.0)) throw ConfigError("norm.std entries must be positive");
  }
  if (data_source == "files") {
    ParseLayout(data_layout);
    if (data_root.empty()) throw ConfigError("data.root is required when data.source = files");
    if (!std::filesystem::is_directory(data_root)) {
      throw ConfigError("data.root '" + data_root + "' is not a directory");
    }
  } else if (data_source == "toy") {
    if (toy.height % ModelConfig::kInputMultiple != 0 || toy.width % ModelConfig::kInputMultiple != 0 ||
        toy.height < 32 || toy.width < 32) {
      throw ConfigError("toy.height and toy.width must be positive multiples of 32");
    }
    if (toy.n_images < 1) throw ConfigError("toy.n_images must be >= 1");
  } else {
    throw ConfigError("data.source must be toy or files, got '" + data_source + "'");
  }
  if (!pretrained.empty() && !std::filesystem::is_regular_file(pretrained)) {
    throw ConfigError("model.pretrained '" + pretrained + "' does not exist");
  }
  if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
  if (profile_h < 32 || profile_w < 32 || profile_h % 32 != 0 || profile_w % 32 != 0) {
    throw ConfigError("profile input size must be positive multiples of 32");
  }
  if (latency_iters < 1 || latency_warmup < 0) throw ConfigError("profile.iters must be >= 1 and warmup >= 0");
  if (palette != "auto" && palette != "cityscapes" && palette != "toy") {
    throw ConfigError("predict.palette must be auto, cityscapes or toy");
  }
}

RunConfig ParseRunConfig(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(fmt::format("{}:{}: malformed section header", origin, line_no));
      section = Trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected key = value", origin, line_no));
    std::string key = Trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    try {
      SetKey(cfg, key, Trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, line_no, e.what()));
    }
  }
  Sync(cfg);
  return cfg;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseRunConfig(buffer.str(), path);
}

void ApplyOverride(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  SetKey(cfg, Trim(assignment.substr(0, eq)), Trim(assignment.substr(eq + 1)));
  Sync(cfg);
}

void ApplyEnvironment(RunConfig& cfg) {
  if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') cfg.output_dir = root;
}

std::string FormatRunConfig(const RunConfig& cfg) {
  std::string out = "# resolved configuration\n";
  for (const auto& spec : Keys()) out += spec.key + " = " + spec.get(cfg) + "\n";
  return out;
}

std::vector<std::string> RunConfigKeys() {
  std::vector<std::string> out;
  for (const auto& spec : Keys()) out.push_back(spec.key);
  return out;
}

}  // namespace dmanet::tools
