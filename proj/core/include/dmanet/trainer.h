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
#ifndef DMANET_TRAINER_H_
#define DMANET_TRAINER_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dmanet/data.h"
#include "dmanet/dma_net.h"
#include "dmanet/losses.h"
#include "dmanet/weight_archive.h"

namespace dmanet {

struct TrainConfig {
  double base_lr = 0.005;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double power = 0.9;
  std::int64_t total_iters = 1;
  // Batch statistics on the 1x1 FTB channel path need at least two samples.
  std::size_t batch_size = 2;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  OhemConfig ohem;

  void Validate() const;
};

// base * (1 - iter / total)^power. Throws std::out_of_range unless
// 0 <= iter <= total.
double PolyLr(double base, std::int64_t iter, std::int64_t total, double power);

// One momentum-SGD update in place:
//   v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v
// Throws ShapeError when the three tensors disagree.
void SgdUpdate(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum, double weight_decay);

// Momentum SGD over a fixed parameter list. Parameters marked Decay::kExempt
// are updated without weight decay.
class Sgd {
 public:
  Sgd(std::vector<NamedParam> params, double momentum, double weight_decay);

  // Applies one step from the gradients currently stored on the parameters.
  // A parameter that received no gradient is treated as having a zero one.
  void Step(double lr);
  void ZeroGrad();

  const std::vector<NamedParam>& params() const { return params_; }
  std::vector<Tensor>& velocities() { return velocities_; }
  const std::vector<Tensor>& velocities() const { return velocities_; }

 private:
  std::vector<NamedParam> params_;
  std::vector<Tensor> velocities_;
  double momentum_;
  double weight_decay_;
};

struct TrainRecord {
  std::int64_t iter = 0;
  double lr = 0.0;
  double loss = 0.0;
};

// Deterministic training driver. Iteration i always sees the same batch and
// augmentation draws for a given seed, so a run resumed from a checkpoint
// reproduces the uninterrupted loss trace.
class Trainer {
 public:
  Trainer(DmaNetParams& model, const Dataset& data, TrainConfig cfg, AugConfig aug, Normalization norm = {});

  // Runs iteration next_iter() and advances. Throws std::out_of_range once
  // total_iters have run.
  TrainRecord Step();

  // Runs the remaining iterations; `after_step` sees each record as it lands.
  std::vector<TrainRecord> Run(const std::function<void(const TrainRecord&)>& after_step = {});

  std::int64_t next_iter() const { return next_iter_; }
  bool done() const { return next_iter_ >= cfg_.total_iters; }
  const TrainConfig& config() const { return cfg_; }

  // Dataset indices used by iteration `iter`.
  std::vector<std::size_t> BatchIndices(std::int64_t iter) const;

  // A checkpoint holds the model arrays plus the optimizer state (velocities
  // under "velocity/"). It is written in float64 through a temporary file.
  void SaveCheckpoint(const std::string& path) const;
  void LoadCheckpoint(const std::string& path);

 private:
  DmaNetParams& model_;
  const Dataset& data_;
  TrainConfig cfg_;
  AugConfig aug_;
  Normalization norm_;
  Sgd sgd_;
  std::int64_t next_iter_ = 0;
};

// Runs a fresh Trainer to completion and returns its history.
std::vector<TrainRecord> TrainLoop(DmaNetParams& model, const Dataset& data, const TrainConfig& cfg,
                                   const AugConfig& aug);

// Metadata describing the graph a weight archive was produced from.
void DescribeModel(const ModelConfig& config, WeightArchive& archive);
// Throws ConfigError if the archive metadata names a different class count or
// width layout than `config`.
void CheckArchiveMatches(const WeightArchive& archive, const ModelConfig& config);

// Writes every model array as float32 for deployment.
void ExportWeights(const std::string& path, DmaNetParams& model);
// Loads model arrays (velocity entries are ignored).
void LoadModelWeights(const std::string& path, DmaNetParams& model);

}  // namespace dmanet

#endif  // DMANET_TRAINER_H_
