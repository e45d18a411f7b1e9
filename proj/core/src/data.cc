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
#include "dmanet/data.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>

namespace dmanet {
namespace fs = std::filesystem;
namespace {

std::array<std::uint8_t, 256> MakeCityscapesIdMap() {
  std::array<std::uint8_t, 256> map;
  map.fill(kIgnoreId);
  // labelId -> trainId for the 19 evaluated classes.
  const std::array<std::pair<int, int>, 19> kPairs{{{7, 0},   {8, 1},   {11, 2},  {12, 3},  {13, 4},
                                                    {17, 5},  {19, 6},  {20, 7},  {21, 8},  {22, 9},
                                                    {23, 10}, {24, 11}, {25, 12}, {26, 13}, {27, 14},
                                                    {28, 15}, {31, 16}, {32, 17}, {33, 18}}};
  for (auto [raw, train] : kPairs) map[static_cast<std::size_t>(raw)] = static_cast<std::uint8_t>(train);
  return map;
}

std::array<std::uint8_t, 256> MakeCamVidIdMap() {
  std::array<std::uint8_t, 256> map;
  map.fill(kIgnoreId);
  for (int i = 0; i < 11; ++i) map[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  return map;
}

std::array<std::uint8_t, 256> IdentityIdMap() {
  std::array<std::uint8_t, 256> map;
  for (int i = 0; i < 256; ++i) map[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  return map;
}

std::vector<fs::path> ListPngs(const fs::path& dir, bool recursive) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  auto take = [&](const fs::directory_entry& e) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  };
  if (recursive) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) take(e);
  } else {
    for (const auto& e : fs::directory_iterator(dir)) take(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void RequireDirectory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory '" + dir.string() + "' does not exist");
}

std::string ReplaceSuffix(const std::string& s, const std::string& from, const std::string& to) {
  if (s.size() < from.size() || s.compare(s.size() - from.size(), from.size(), from) != 0) return {};
  return s.substr(0, s.size() - from.size()) + to;
}

}  // namespace

DatasetLayout ParseLayout(const std::string& name) {
  if (name == "cityscapes") return DatasetLayout::kCityscapes;
  if (name == "camvid") return DatasetLayout::kCamVid;
  if (name == "generic") return DatasetLayout::kGeneric;
  throw ConfigError("unknown dataset layout '" + name + "' (expected cityscapes|camvid|generic)");
}

const std::array<std::uint8_t, 256>& CityscapesIdMap() {
  static const auto map = MakeCityscapesIdMap();
  return map;
}

const std::array<std::uint8_t, 256>& CamVidIdMap() {
  static const auto map = MakeCamVidIdMap();
  return map;
}

const std::vector<std::string>& CityscapesClassNames() {
  static const std::vector<std::string> names{"road",       "sidewalk",     "building", "wall",       "fence",
                                              "pole",       "traffic light", "traffic sign", "vegetation", "terrain",
                                              "sky",        "person",       "rider",    "car",        "truck",
                                              "bus",        "train",        "motorcycle", "bicycle"};
  return names;
}

const std::vector<std::string>& CamVidClassNames() {
  static const std::vector<std::string> names{"sky",  "building",   "pole", "road",       "sidewalk", "tree",
                                              "sign", "fence",      "car",  "pedestrian", "bicyclist"};
  return names;
}

const Palette& CityscapesPalette() {
  static const Palette palette{{{128, 64, 128}}, {{244, 35, 232}}, {{70, 70, 70}},   {{102, 102, 156}}, {{190, 153, 153}},
                               {{153, 153, 153}}, {{250, 170, 30}}, {{220, 220, 0}},  {{107, 142, 35}},  {{152, 251, 152}},
                               {{70, 130, 180}},  {{220, 20, 60}},  {{255, 0, 0}},    {{0, 0, 142}},     {{0, 0, 70}},
                               {{0, 60, 100}},    {{0, 80, 100}},   {{0, 0, 230}},    {{119, 11, 32}}};
  return palette;
}

Palette ToyPalette(int num_classes) {
  static const Palette base{{{230, 25, 75}},  {{60, 180, 75}},  {{255, 225, 25}}, {{0, 130, 200}},
                            {{245, 130, 48}}, {{145, 30, 180}}, {{70, 240, 240}}, {{240, 50, 230}},
                            {{210, 245, 60}}, {{250, 190, 212}}, {{0, 128, 128}},  {{170, 110, 40}}};
  Palette out;
  for (int k = 0; k < num_classes; ++k) {
    if (static_cast<std::size_t>(k) < base.size()) {
      out.push_back(base[static_cast<std::size_t>(k)]);
    } else {
      // Golden-angle hue walk for the overflow.
      const double hue = std::fmod(k * 137.508, 360.0) / 60.0;
      const double x = 1.0 - std::fabs(std::fmod(hue, 2.0) - 1.0);
      std::array<double, 3> rgb{};
      switch (static_cast<int>(hue)) {
        case 0: rgb = {1, x, 0}; break;
        case 1: rgb = {x, 1, 0}; break;
        case 2: rgb = {0, 1, x}; break;
        case 3: rgb = {0, x, 1}; break;
        case 4: rgb = {x, 0, 1}; break;
        default: rgb = {1, 0, x}; break;
      }
      out.push_back({static_cast<std::uint8_t>(rgb[0] * 255), static_cast<std::uint8_t>(rgb[1] * 255),
                     static_cast<std::uint8_t>(rgb[2] * 255)});
    }
  }
  return out;
}

Image8 ImageToRgb8(const Tensor& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw ShapeError("expected a (3,H,W) image, got " + ShapeToString(chw.shape()));
  Image8 img{chw.dim(1), chw.dim(2), 3, {}};
  img.data.resize(static_cast<std::size_t>(img.height * img.width * 3));
  const std::int64_t plane = img.height * img.width;
  for (std::int64_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(chw[c * plane + i], 0.0, 1.0);
      img.data[static_cast<std::size_t>(i * 3 + c)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return img;
}

Tensor Rgb8ToImage(const Image8& rgb) {
  if (rgb.channels != 3) throw ShapeError("expected an RGB image");
  Tensor t(Shape{3, rgb.height, rgb.width});
  const std::int64_t plane = rgb.height * rgb.width;
  for (std::int64_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) t[c * plane + i] = rgb.data[static_cast<std::size_t>(i * 3 + c)] / 255.0;
  }
  return t;
}

Sample FileDataset::Get(std::size_t index) const {
  const FilePair& pair = pairs_.at(index);
  Image8 rgb = ReadPngRgb(pair.image);
  Image8 ids = ReadPngIndices(pair.label);
  if (ids.height != rgb.height || ids.width != rgb.width) {
    throw ValidationError("label '" + pair.label + "' size differs from image '" + pair.image + "'");
  }
  Sample s;
  s.image = Rgb8ToImage(rgb);
  s.label = LabelMap(1, ids.height, ids.width);
  for (std::size_t i = 0; i < s.label.data.size(); ++i) s.label.data[i] = id_map_[ids.data[i]];
  return s;
}

std::string FileDataset::Name(std::size_t index) const { return fs::path(pairs_.at(index).image).stem().string(); }

FileDataset LoadDataset(const std::string& root_str, const std::string& split, DatasetLayout layout) {
  const fs::path root(root_str);
  RequireDirectory(root);
  std::vector<FilePair> pairs;
  std::array<std::uint8_t, 256> id_map = IdentityIdMap();
  auto add_pair = [&](const fs::path& image, const fs::path& label) {
    if (!fs::is_regular_file(label)) {
      throw IoError("image '" + image.string() + "' has no label (expected '" + label.string() + "')");
    }
    pairs.push_back({image.string(), label.string()});
  };
  switch (layout) {
    case DatasetLayout::kCityscapes: {
      id_map = CityscapesIdMap();
      const fs::path images = root / "leftImg8bit" / split;
      RequireDirectory(images);
      for (const auto& img : ListPngs(images, true)) {
        const std::string label_name = ReplaceSuffix(img.filename().string(), "_leftImg8bit.png", "_gtFine_labelIds.png");
        if (label_name.empty()) continue;
        add_pair(img, root / "gtFine" / split / img.parent_path().filename() / label_name);
      }
      break;
    }
    case DatasetLayout::kCamVid: {
      id_map = CamVidIdMap();
      const fs::path images = root / split;
      RequireDirectory(images);
      for (const auto& img : ListPngs(images, false)) add_pair(img, root / (split + "annot") / img.filename());
      break;
    }
    case DatasetLayout::kGeneric: {
      fs::path base = root;
      if (!split.empty() && fs::is_directory(root / split / "images")) base = root / split;
      RequireDirectory(base / "images");
      for (const auto& img : ListPngs(base / "images", false)) add_pair(img, base / "labels" / img.filename());
      break;
    }
  }
  if (pairs.empty()) throw IoError("dataset '" + root_str + "' split '" + split + "' contains no images");
  return FileDataset(std::move(pairs), id_map);
}

void AugConfig::Validate() const {
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) throw ConfigError("aug.hflip_prob must be in [0, 1]");
  if (!(scale_min > 0.0 && scale_min <= scale_max)) throw ConfigError("aug.scale_min/scale_max must be 0 < min <= max");
  if (crop_h < 32 || crop_w < 32 || crop_h % 32 != 0 || crop_w % 32 != 0) {
    throw ConfigError("aug crop " + std::to_string(crop_h) + "x" + std::to_string(crop_w) +
                      " must be positive multiples of 32");
  }
}

Tensor ResizeImageBilinear(const Tensor& chw, std::int64_t out_h, std::int64_t out_w) {
  const std::int64_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (h == out_h && w == out_w) return chw;
  Tensor out(Shape{c, out_h, out_w});
  auto coord = [](std::int64_t i, std::int64_t in, std::int64_t out_n, std::int64_t& lo, std::int64_t& hi, double& f) {
    double src = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(out_n) - 0.5;
    src = std::max(src, 0.0);
    lo = std::min(static_cast<std::int64_t>(src), in - 1);
    hi = std::min(lo + 1, in - 1);
    f = src - static_cast<double>(lo);
  };
  for (std::int64_t y = 0; y < out_h; ++y) {
    std::int64_t y0, y1;
    double fy;
    coord(y, h, out_h, y0, y1, fy);
    for (std::int64_t x = 0; x < out_w; ++x) {
      std::int64_t x0, x1;
      double fx;
      coord(x, w, out_w, x0, x1, fx);
      for (std::int64_t k = 0; k < c; ++k) {
        const double* p = chw.data() + k * h * w;
        const double top = (1 - fx) * p[y0 * w + x0] + fx * p[y0 * w + x1];
        const double bot = (1 - fx) * p[y1 * w + x0] + fx * p[y1 * w + x1];
        out[(k * out_h + y) * out_w + x] = (1 - fy) * top + fy * bot;
      }
    }
  }
  return out;
}

LabelMap ResizeLabelNearest(const LabelMap& label, std::int64_t out_h, std::int64_t out_w) {
  if (label.height == out_h && label.width == out_w) return label;
  LabelMap out(label.batch, out_h, out_w);
  for (std::int64_t n = 0; n < label.batch; ++n) {
    for (std::int64_t y = 0; y < out_h; ++y) {
      const std::int64_t sy = std::min(label.height - 1, (2 * y + 1) * label.height / (2 * out_h));
      for (std::int64_t x = 0; x < out_w; ++x) {
        const std::int64_t sx = std::min(label.width - 1, (2 * x + 1) * label.width / (2 * out_w));
        out.at(n, y, x) = label.at(n, sy, sx);
      }
    }
  }
  return out;
}

Sample FlipHorizontal(const Sample& sample) {
  Sample out = sample;
  const std::int64_t c = sample.image.dim(0), h = sample.image.dim(1), w = sample.image.dim(2);
  for (std::int64_t k = 0; k < c; ++k) {
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t x = 0; x < w; ++x) out.image[(k * h + y) * w + x] = sample.image[(k * h + y) * w + (w - 1 - x)];
    }
  }
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) out.label.at(0, y, x) = sample.label.at(0, y, w - 1 - x);
  }
  return out;
}

Sample Augment(const Sample& sample, const AugConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool flip = unit(rng) < cfg.hflip_prob;
  const double scale = cfg.scale_min + (cfg.scale_max - cfg.scale_min) * unit(rng);
  Sample s = flip ? FlipHorizontal(sample) : sample;

  const std::int64_t h = s.image.dim(1), w = s.image.dim(2);
  const std::int64_t sh = std::max<std::int64_t>(1, std::llround(static_cast<double>(h) * scale));
  const std::int64_t sw = std::max<std::int64_t>(1, std::llround(static_cast<double>(w) * scale));
  Tensor img = ResizeImageBilinear(s.image, sh, sw);
  LabelMap lbl = ResizeLabelNearest(s.label, sh, sw);

  // Offsets are drawn even when no crop is needed so the stream stays aligned.
  const std::int64_t oy = static_cast<std::int64_t>(unit(rng) * static_cast<double>(std::max<std::int64_t>(0, sh - cfg.crop_h) + 1));
  const std::int64_t ox = static_cast<std::int64_t>(unit(rng) * static_cast<double>(std::max<std::int64_t>(0, sw - cfg.crop_w) + 1));
  const std::int64_t off_y = std::min(oy, std::max<std::int64_t>(0, sh - cfg.crop_h));
  const std::int64_t off_x = std::min(ox, std::max<std::int64_t>(0, sw - cfg.crop_w));

  Sample out;
  out.image = Tensor(Shape{3, cfg.crop_h, cfg.crop_w});
  out.label = LabelMap(1, cfg.crop_h, cfg.crop_w, kIgnoreId);
  for (int k = 0; k < 3; ++k) {
    for (std::int64_t y = 0; y < cfg.crop_h; ++y) {
      for (std::int64_t x = 0; x < cfg.crop_w; ++x) {
        const std::int64_t sy = y + off_y, sx = x + off_x;
        const bool inside = sy < sh && sx < sw;
        out.image[(k * cfg.crop_h + y) * cfg.crop_w + x] =
            inside ? img[(k * sh + sy) * sw + sx] : cfg.pad_image[static_cast<std::size_t>(k)];
        if (k == 0 && inside) out.label.at(0, y, x) = lbl.at(0, sy, sx);
      }
    }
  }
  return out;
}

InMemoryDataset MakeSyntheticToy(const ToySpec& spec, std::uint64_t seed) {
  if (spec.n_images < 1) throw ConfigError("toy dataset needs at least one image");
  if (spec.num_classes < 2 || spec.num_classes > 255) throw ConfigError("toy dataset needs 2..255 classes");
  if (spec.height < 32 || spec.width < 32 || spec.height % 32 != 0 || spec.width % 32 != 0) {
    throw ConfigError("toy dataset height/width must be positive multiples of 32");
  }
  const Palette palette = ToyPalette(spec.num_classes);
  const int k = spec.num_classes;
  std::vector<LabelMap> labels;
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < spec.n_images; ++i) {
    Rng rng(MixSeed(seed, i));
    LabelMap lbl(1, spec.height, spec.width, static_cast<std::uint8_t>(std::uniform_int_distribution<int>(0, k - 1)(rng)));
    // Shapes are sized well above the 8-pixel stride of the principal head.
    std::uniform_int_distribution<int> n_shapes(2, 4);
    const int shapes = n_shapes(rng);
    for (int s = 0; s < shapes; ++s) {
      // The first shape cycles through classes so small sets still cover all of them.
      const int cls = s == 0 ? static_cast<int>(i % static_cast<std::size_t>(k))
                             : std::uniform_int_distribution<int>(0, k - 1)(rng);
      const double cy = std::uniform_real_distribution<double>(0, spec.height)(rng);
      const double cx = std::uniform_real_distribution<double>(0, spec.width)(rng);
      const double ry = std::uniform_real_distribution<double>(spec.height / 4.0, spec.height / 2.0)(rng);
      const double rx = std::uniform_real_distribution<double>(spec.width / 5.0, spec.width / 3.0)(rng);
      const bool ellipse = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
      for (std::int64_t y = 0; y < spec.height; ++y) {
        for (std::int64_t x = 0; x < spec.width; ++x) {
          const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
          const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
          const bool hit = ellipse ? dy * dy + dx * dx <= 1.0 : std::fabs(dy) <= 1.0 && std::fabs(dx) <= 1.0;
          if (hit) lbl.at(0, y, x) = static_cast<std::uint8_t>(cls);
        }
      }
    }
    labels.push_back(std::move(lbl));
    rngs.push_back(rng);
  }
  // Post-check: paint a patch for any class that ended up fully occluded.
  std::vector<std::uint64_t> histogram(static_cast<std::size_t>(k), 0);
  for (const auto& l : labels) {
    for (auto v : l.data) ++histogram[v];
  }
  for (int c = 0; c < k; ++c) {
    if (histogram[static_cast<std::size_t>(c)] > 0) continue;
    LabelMap& l = labels[static_cast<std::size_t>(c) % labels.size()];
    for (std::int64_t y = 0; y < spec.height / 4; ++y) {
      for (std::int64_t x = 0; x < spec.width / 4; ++x) l.at(0, y, x) = static_cast<std::uint8_t>(c);
    }
  }
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Rng& rng = rngs[i];
    std::uniform_real_distribution<double> noise(-0.04, 0.04);
    Sample s;
    s.label = std::move(labels[i]);
    s.image = Tensor(Shape{3, spec.height, spec.width});
    const std::int64_t plane = spec.height * spec.width;
    for (std::int64_t p = 0; p < plane; ++p) {
      const Rgb& color = palette[s.label.data[static_cast<std::size_t>(p)]];
      for (int ch = 0; ch < 3; ++ch) {
        s.image[ch * plane + p] = std::clamp(color[static_cast<std::size_t>(ch)] / 255.0 + noise(rng), 0.0, 1.0);
      }
    }
    samples.push_back(std::move(s));
  }
  return InMemoryDataset(std::move(samples));
}

Batch MakeBatch(const std::vector<Sample>& samples, const Normalization& norm) {
  if (samples.empty()) throw ValidationError("cannot build an empty batch");
  const std::int64_t h = samples[0].image.dim(1), w = samples[0].image.dim(2);
  const auto n = static_cast<std::int64_t>(samples.size());
  Batch b;
  b.images = Tensor(Shape{n, 3, h, w});
  b.labels = LabelMap(n, h, w);
  const std::int64_t plane = h * w;
  for (std::int64_t i = 0; i < n; ++i) {
    const Sample& s = samples[static_cast<std::size_t>(i)];
    if (s.image.dim(1) != h || s.image.dim(2) != w || s.label.height != h || s.label.width != w) {
      throw ValidationError("batch samples must share one spatial size");
    }
    for (int c = 0; c < 3; ++c) {
      const double mean = norm.mean[static_cast<std::size_t>(c)];
      const double inv = 1.0 / norm.std[static_cast<std::size_t>(c)];
      for (std::int64_t p = 0; p < plane; ++p) {
        b.images[(i * 3 + c) * plane + p] = (s.image[c * plane + p] - mean) * inv;
      }
    }
    std::copy(s.label.data.begin(), s.label.data.end(), b.labels.data.begin() + i * plane);
  }
  return b;
}

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::vector<std::size_t>> EpochBatches(std::size_t n, std::size_t batch_size, bool shuffle,
                                                   std::uint64_t seed, std::uint64_t epoch, bool drop_last) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    Rng rng(MixSeed(seed, epoch, 0x5eed));
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    const std::size_t end = std::min(n, i + batch_size);
    if (end - i < batch_size && drop_last) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

BatchIterator::BatchIterator(const Dataset& dataset, std::size_t batch_size, bool shuffle, std::uint64_t seed,
                             Mode mode, Normalization norm)
    : dataset_(dataset), batch_size_(batch_size), shuffle_(shuffle), seed_(seed), mode_(mode), norm_(norm) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (mode == Mode::kTrain && dataset.size() < batch_size) {
    throw ConfigError("training batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                      std::to_string(dataset.size()));
  }
  current_ = EpochBatches(dataset.size(), batch_size, shuffle, seed, 0, mode == Mode::kTrain);
}

std::optional<std::vector<std::size_t>> BatchIterator::NextIndices() {
  if (position_ >= current_.size()) {
    if (mode_ == Mode::kEval) return std::nullopt;
    ++epoch_;
    current_ = EpochBatches(dataset_.size(), batch_size_, shuffle_, seed_, epoch_, true);
    position_ = 0;
  }
  return current_[position_++];
}

std::optional<Batch> BatchIterator::Next() {
  auto indices = NextIndices();
  if (!indices) return std::nullopt;
  std::vector<Sample> samples;
  for (auto i : *indices) samples.push_back(dataset_.Get(i));
  return MakeBatch(samples, norm_);
}

}  // namespace dmanet
