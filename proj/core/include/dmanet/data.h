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
#ifndef DMANET_DATA_H_
#define DMANET_DATA_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmanet/layers.h"
#include "dmanet/png_io.h"
#include "dmanet/tensor.h"

namespace dmanet {

// One image with its labels. `image` is (3, H, W) with values in [0, 1];
// `label` is (1, H, W).
struct Sample {
  Tensor image;
  LabelMap label;
};

class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual std::size_t size() const = 0;
  virtual Sample Get(std::size_t index) const = 0;
  virtual std::string Name(std::size_t index) const { return "sample_" + std::to_string(index); }
};

class InMemoryDataset : public Dataset {
 public:
  InMemoryDataset() = default;
  explicit InMemoryDataset(std::vector<Sample> samples) : samples_(std::move(samples)) {}

  std::size_t size() const override { return samples_.size(); }
  Sample Get(std::size_t index) const override { return samples_.at(index); }
  const std::vector<Sample>& samples() const { return samples_; }

 private:
  std::vector<Sample> samples_;
};

enum class DatasetLayout { kCityscapes, kCamVid, kGeneric };

// Throws ConfigError for names other than cityscapes|camvid|generic.
DatasetLayout ParseLayout(const std::string& name);

struct FilePair {
  std::string image;
  std::string label;
};

// Lazily decoded (image, label) PNG pairs with a raw-id -> train-id table.
class FileDataset : public Dataset {
 public:
  FileDataset(std::vector<FilePair> pairs, std::array<std::uint8_t, 256> id_map)
      : pairs_(std::move(pairs)), id_map_(id_map) {}

  std::size_t size() const override { return pairs_.size(); }
  Sample Get(std::size_t index) const override;
  std::string Name(std::size_t index) const override;
  const std::vector<FilePair>& pairs() const { return pairs_; }

 private:
  std::vector<FilePair> pairs_;
  std::array<std::uint8_t, 256> id_map_;
};

// Indexes `root` for `split`. Throws IoError on a missing/empty directory or
// an image without a label (the orphan is named).
FileDataset LoadDataset(const std::string& root, const std::string& split, DatasetLayout layout);

// Cityscapes labelIds -> 19 train ids, everything else 255.
const std::array<std::uint8_t, 256>& CityscapesIdMap();
// CamVid: ids 0..10 kept, 11 (void) and above -> 255.
const std::array<std::uint8_t, 256>& CamVidIdMap();
const std::vector<std::string>& CityscapesClassNames();
const std::vector<std::string>& CamVidClassNames();
const Palette& CityscapesPalette();
Palette ToyPalette(int num_classes);

Image8 ImageToRgb8(const Tensor& chw);
Tensor Rgb8ToImage(const Image8& rgb);

struct AugConfig {
  double hflip_prob = 0.5;
  double scale_min = 0.5;
  double scale_max = 2.0;
  std::int64_t crop_h = 768;
  std::int64_t crop_w = 1536;
  // Image padding in [0, 1] units; the normalization mean maps to zero.
  std::array<double, 3> pad_image{0.485, 0.456, 0.406};

  void Validate() const;
};

// Flip, uniform scale (bilinear image, nearest label), random crop with
// padding. Output is always crop_h x crop_w.
Sample Augment(const Sample& sample, const AugConfig& cfg, Rng& rng);

Tensor ResizeImageBilinear(const Tensor& chw, std::int64_t out_h, std::int64_t out_w);
LabelMap ResizeLabelNearest(const LabelMap& label, std::int64_t out_h, std::int64_t out_w);
Sample FlipHorizontal(const Sample& sample);

struct ToySpec {
  std::size_t n_images = 8;
  int num_classes = 4;
  std::int64_t height = 64;
  std::int64_t width = 128;
};

// Images of colored rectangles and ellipses over a background; the label of
// a pixel is the class whose color painted it. Every class appears somewhere
// in the set. Deterministic per seed.
InMemoryDataset MakeSyntheticToy(const ToySpec& spec, std::uint64_t seed);

struct Normalization {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
};

struct Batch {
  Tensor images;  // (N, 3, H, W), normalized
  LabelMap labels;
};

Batch MakeBatch(const std::vector<Sample>& samples, const Normalization& norm);

// Deterministic index batches for one epoch. Shuffling uses a permutation
// derived from (seed, epoch).
std::vector<std::vector<std::size_t>> EpochBatches(std::size_t n, std::size_t batch_size, bool shuffle,
                                                   std::uint64_t seed, std::uint64_t epoch, bool drop_last);

// Streams batches: training mode cycles epochs forever and drops the final
// partial batch; eval mode makes one pass and keeps it.
class BatchIterator {
 public:
  enum class Mode { kTrain, kEval };

  BatchIterator(const Dataset& dataset, std::size_t batch_size, bool shuffle, std::uint64_t seed, Mode mode,
                Normalization norm = {});

  std::optional<std::vector<std::size_t>> NextIndices();
  std::optional<Batch> Next();

 private:
  const Dataset& dataset_;
  std::size_t batch_size_;
  bool shuffle_;
  std::uint64_t seed_;
  Mode mode_;
  Normalization norm_;
  std::uint64_t epoch_ = 0;
  std::size_t position_ = 0;
  std::vector<std::vector<std::size_t>> current_;
};

// splitmix64 finalizer over the combined inputs.
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace dmanet

#endif  // DMANET_DATA_H_
