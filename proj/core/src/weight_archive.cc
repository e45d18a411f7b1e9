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
#include "dmanet/weight_archive.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace dmanet {
namespace {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

constexpr char kMagic[4] = {'D', 'M', 'A', 'W'};
constexpr std::uint32_t kVersion = 1;
// Guards against allocating absurd sizes from a corrupt header.
constexpr std::uint32_t kMaxString = 1u << 20;

template <typename T>
void Put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void PutString(std::ofstream& out, const std::string& s) {
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open weight archive '" + path + "'");
  }

  template <typename T>
  T Get() {
    T v{};
    Read(&v, sizeof(T));
    return v;
  }

  std::string GetString() {
    const auto n = Get<std::uint32_t>();
    if (n > kMaxString) throw IoError("corrupt weight archive '" + path_ + "': string length " + std::to_string(n));
    std::string s(n, '\0');
    Read(s.data(), n);
    return s;
  }

  void Read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in_) throw IoError("truncated weight archive '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace

void WriteArchive(const std::string& path, const WeightArchive& archive, DType dtype) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write weight archive '" + path + "'");
  out.write(kMagic, 4);
  Put<std::uint32_t>(out, kVersion);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(archive.metadata.size()));
  for (const auto& [k, v] : archive.metadata) {
    PutString(out, k);
    PutString(out, v);
  }
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(archive.arrays.size()));
  for (const auto& [name, t] : archive.arrays) {
    PutString(out, name);
    Put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) Put<std::int64_t>(out, d);
    if (dtype == DType::kFloat32) {
      std::vector<float> buf(t.values().begin(), t.values().end());
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    } else {
      out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
  }
  out.flush();
  if (!out) throw IoError("failed writing weight archive '" + path + "'");
}

WeightArchive ReadArchive(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.Read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("'" + path + "' is not a weight archive");
  const auto version = r.Get<std::uint32_t>();
  if (version != kVersion) throw IoError("unsupported weight archive version " + std::to_string(version));
  WeightArchive archive;
  const auto n_meta = r.Get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.GetString();
    archive.metadata[k] = r.GetString();
  }
  const auto n_arrays = r.Get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    std::string name = r.GetString();
    const auto dtype = r.Get<std::uint8_t>();
    const auto rank = r.Get<std::uint32_t>();
    if (rank > 8) throw IoError("corrupt weight archive '" + path + "': rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.Get<std::int64_t>();
      if (d < 0 || d > (std::int64_t{1} << 32)) throw IoError("corrupt weight archive '" + path + "': bad dimension");
    }
    Tensor t(shape);
    if (dtype == static_cast<std::uint8_t>(DType::kFloat32)) {
      std::vector<float> buf(static_cast<std::size_t>(t.size()));
      r.Read(buf.data(), buf.size() * sizeof(float));
      for (std::int64_t j = 0; j < t.size(); ++j) t[j] = buf[static_cast<std::size_t>(j)];
    } else if (dtype == static_cast<std::uint8_t>(DType::kFloat64)) {
      r.Read(t.data(), static_cast<std::size_t>(t.size()) * sizeof(double));
    } else {
      throw IoError("corrupt weight archive '" + path + "': unknown dtype " + std::to_string(dtype));
    }
    archive.arrays[name] = std::move(t);
  }
  return archive;
}

void CheckNamedArray(const WeightArchive& archive, const std::string& name, const Shape& shape) {
  auto it = archive.arrays.find(name);
  if (it == archive.arrays.end()) {
    const auto dot = name.find('.');
    throw ValidationError("weight archive is missing '" + name + "' (group '" + name.substr(0, dot) + "')");
  }
  if (it->second.shape() != shape) {
    throw ShapeError("weight '" + name + "' has shape " + ShapeToString(it->second.shape()) + " but the model expects " +
                     ShapeToString(shape));
  }
}

}  // namespace dmanet
