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
#include "dmanet/trainer.h"

#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace dmanet {
namespace {

constexpr char kVelocityPrefix[] = "velocity/";

bool IsVelocityKey(const std::string& key) { return key.rfind(kVelocityPrefix, 0) == 0; }

// Publishes `archive` at `path` only after the full file is on disk, so an
// interrupted write leaves any previous file intact.
void WriteArchiveAtomically(const std::string& path, const WeightArchive& archive, DType dtype) {
  const std::string tmp = path + ".tmp";
  WriteArchive(tmp, archive, dtype);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

}  // namespace

void TrainConfig::Validate() const {
  if (batch_size < 2) {
    throw ConfigError("train.batch_size must be >= 2: batch norm on the 1x1 channel path has no statistics at batch 1");
  }
  if (total_iters < 1) throw ConfigError("train.total_iters must be >= 1");
  if (!(base_lr > 0.0)) throw ConfigError("train.base_lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(power > 0.0)) throw ConfigError("train.power must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("train.lambda must be >= 0");
  ohem.Validate();
}

double PolyLr(double base, std::int64_t iter, std::int64_t total, double power) {
  if (total < 1 || iter < 0 || iter > total) {
    throw std::out_of_range("poly lr: iteration " + std::to_string(iter) + " outside [0, " + std::to_string(total) + "]");
  }
  if (iter == total) return 0.0;
  return base * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(total), power);
}

void SgdUpdate(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum, double weight_decay) {
  if (!param.SameShape(grad) || !param.SameShape(velocity)) {
    throw ShapeError("sgd: param " + ShapeToString(param.shape()) + ", grad " + ShapeToString(grad.shape()) +
                     " and velocity " + ShapeToString(velocity.shape()) + " must agree");
  }
  double* p = param.data();
  const double* g = grad.data();
  double* v = velocity.data();
  for (std::int64_t i = 0; i < param.size(); ++i) {
    v[i] = momentum * v[i] + g[i] + weight_decay * p[i];
    p[i] -= lr * v[i];
  }
}

Sgd::Sgd(std::vector<NamedParam> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  velocities_.reserve(params_.size());
  for (const auto& p : params_) velocities_.emplace_back(p.var.shape());
}

void Sgd::Step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    NamedParam& p = params_[i];
    const double decay = p.decay == Decay::kApply ? weight_decay_ : 0.0;
    if (p.var.grad().empty()) {
      SgdUpdate(p.var.mutable_value(), Tensor(p.var.shape()), velocities_[i], lr, momentum_, decay);
    } else {
      SgdUpdate(p.var.mutable_value(), p.var.grad(), velocities_[i], lr, momentum_, decay);
    }
  }
}

void Sgd::ZeroGrad() {
  for (auto& p : params_) p.var.ZeroGrad();
}

Trainer::Trainer(DmaNetParams& model, const Dataset& data, TrainConfig cfg, AugConfig aug, Normalization norm)
    : model_(model),
      data_(data),
      cfg_(std::move(cfg)),
      aug_(aug),
      norm_(norm),
      sgd_(CollectParams(model).params, cfg_.momentum, cfg_.weight_decay) {
  cfg_.Validate();
  aug_.Validate();
  model_.config.Validate();
  if (data_.size() < cfg_.batch_size) {
    throw ConfigError("training set has " + std::to_string(data_.size()) + " samples, fewer than batch size " +
                      std::to_string(cfg_.batch_size));
  }
}

std::vector<std::size_t> Trainer::BatchIndices(std::int64_t iter) const {
  const std::size_t per_epoch = data_.size() / cfg_.batch_size;
  const auto epoch = static_cast<std::uint64_t>(iter) / per_epoch;
  const auto slot = static_cast<std::size_t>(static_cast<std::uint64_t>(iter) % per_epoch);
  return EpochBatches(data_.size(), cfg_.batch_size, true, cfg_.seed, epoch, true)[slot];
}

TrainRecord Trainer::Step() {
  if (done()) throw std::out_of_range("training already ran all " + std::to_string(cfg_.total_iters) + " iterations");
  const std::int64_t iter = next_iter_;
  const double lr = PolyLr(cfg_.base_lr, iter, cfg_.total_iters, cfg_.power);

  std::vector<Sample> samples;
  const std::vector<std::size_t> indices = BatchIndices(iter);
  for (std::size_t slot = 0; slot < indices.size(); ++slot) {
    Sample s = data_.Get(indices[slot]);
    if (s.image.rank() != 3 || s.image.dim(0) != 3 || s.label.height != s.image.dim(1) ||
        s.label.width != s.image.dim(2)) {
      throw ValidationError("sample '" + data_.Name(indices[slot]) + "' has image " + ShapeToString(s.image.shape()) +
                            " but label " + std::to_string(s.label.height) + "x" + std::to_string(s.label.width));
    }
    Rng rng(MixSeed(cfg_.seed, static_cast<std::uint64_t>(iter), slot));
    samples.push_back(Augment(s, aug_, rng));
  }
  Batch batch = MakeBatch(samples, norm_);
  ValidateLabels(batch.labels, model_.config.num_classes);

  sgd_.ZeroGrad();
  ForwardOptions options;
  options.training = true;
  options.with_aux = cfg_.lambda > 0.0;
  ModelOutputs out = DmaForward(model_, Var::Constant(std::move(batch.images)), options);
  Var loss = JointLoss(out, batch.labels, cfg_.lambda, cfg_.ohem);
  const double value = loss.value()[0];
  if (!std::isfinite(value)) throw ValidationError("non-finite loss at iteration " + std::to_string(iter));
  Backward(loss);
  sgd_.Step(lr);
  ++next_iter_;
  return {iter, lr, value};
}

std::vector<TrainRecord> Trainer::Run(const std::function<void(const TrainRecord&)>& after_step) {
  std::vector<TrainRecord> history;
  while (!done()) {
    history.push_back(Step());
    if (after_step) after_step(history.back());
  }
  return history;
}

void Trainer::SaveCheckpoint(const std::string& path) const {
  WeightArchive archive = ExportArchive(model_);
  const auto& params = sgd_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    archive.arrays[kVelocityPrefix + params[i].name] = sgd_.velocities()[i];
  }
  DescribeModel(model_.config, archive);
  archive.metadata["iteration"] = std::to_string(next_iter_);
  archive.metadata["total_iters"] = std::to_string(cfg_.total_iters);
  WriteArchiveAtomically(path, archive, DType::kFloat64);
}

void Trainer::LoadCheckpoint(const std::string& path) {
  const WeightArchive archive = ReadArchive(path);
  CheckArchiveMatches(archive, model_.config);
  auto it = archive.metadata.find("iteration");
  if (it == archive.metadata.end()) throw ValidationError("checkpoint '" + path + "' has no iteration counter");
  const std::int64_t iteration = std::stoll(it->second);
  if (iteration < 0 || iteration > cfg_.total_iters) {
    throw ValidationError("checkpoint iteration " + it->second + " exceeds train.total_iters " +
                          std::to_string(cfg_.total_iters));
  }
  const auto& params = sgd_.params();
  for (const auto& p : params) CheckNamedArray(archive, kVelocityPrefix + p.name, p.var.shape());
  for (const auto& key : ImportArchive(model_, archive)) {
    if (!IsVelocityKey(key)) throw ValidationError("checkpoint '" + path + "' has unexpected array '" + key + "'");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    sgd_.velocities()[i] = archive.arrays.at(kVelocityPrefix + params[i].name);
  }
  next_iter_ = iteration;
}

std::vector<TrainRecord> TrainLoop(DmaNetParams& model, const Dataset& data, const TrainConfig& cfg,
                                   const AugConfig& aug) {
  Trainer trainer(model, data, cfg, aug);
  return trainer.Run();
}

void DescribeModel(const ModelConfig& config, WeightArchive& archive) {
  archive.metadata["num_classes"] = std::to_string(config.num_classes);
  archive.metadata["branch_width"] = std::to_string(config.branch_width);
  archive.metadata["width_divisor"] = std::to_string(config.width_divisor);
  archive.metadata["atrous_rates"] =
      std::to_string(config.atrous_rates[0]) + "," + std::to_string(config.atrous_rates[1]);
}

void CheckArchiveMatches(const WeightArchive& archive, const ModelConfig& config) {
  WeightArchive expected;
  DescribeModel(config, expected);
  for (const auto& [key, want] : expected.metadata) {
    auto it = archive.metadata.find(key);
    if (it != archive.metadata.end() && it->second != want) {
      throw ConfigError("weights were produced with model." + key + " = " + it->second + " but the config has " + want);
    }
  }
}

void ExportWeights(const std::string& path, DmaNetParams& model) {
  WeightArchive archive = ExportArchive(model);
  DescribeModel(model.config, archive);
  WriteArchiveAtomically(path, archive, DType::kFloat32);
}

void LoadModelWeights(const std::string& path, DmaNetParams& model) {
  const WeightArchive archive = ReadArchive(path);
  CheckArchiveMatches(archive, model.config);
  for (const auto& key : ImportArchive(model, archive)) {
    if (!IsVelocityKey(key)) throw ValidationError("weights '" + path + "' have unexpected array '" + key + "'");
  }
}

}  // namespace dmanet
