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
#ifndef DMANET_WEIGHT_ARCHIVE_H_
#define DMANET_WEIGHT_ARCHIVE_H_

#include <cstdint>
#include <map>
#include <string>

#include "dmanet/layers.h"

namespace dmanet {

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

// Flat archive of named arrays plus string metadata.
//
// Layout, all integers little-endian:
//   "DMAW" | u32 version (1)
//   u32 n_meta   { u32 key_len | key | u32 value_len | value } * n_meta
//   u32 n_arrays { u32 name_len | name | u8 dtype | u32 rank | i64 dims[rank] | data } * n_arrays
// Data is row-major; dtype 0 is float32, 1 is float64.
struct WeightArchive {
  std::map<std::string, std::string> metadata;
  std::map<std::string, Tensor> arrays;
};

void WriteArchive(const std::string& path, const WeightArchive& archive, DType dtype);
WeightArchive ReadArchive(const std::string& path);

// Snapshot of every parameter and buffer of `group`.
template <typename Group>
WeightArchive ExportArchive(Group& group) {
  WeightArchive archive;
  ParamCollector c = CollectParams(group);
  for (auto& p : c.params) archive.arrays[p.name] = p.var.value();
  for (auto& b : c.buffers) archive.arrays[b.name] = *b.tensor;
  return archive;
}

// Copies every array of `group` from `archive`; keys absent from the group are
// returned. Throws ValidationError on missing names, ShapeError on mismatch.
template <typename Group>
std::vector<std::string> ImportArchive(Group& group, const WeightArchive& archive);

// Throws unless `archive` holds `name` with exactly `shape`.
void CheckNamedArray(const WeightArchive& archive, const std::string& name, const Shape& shape);

template <typename Group>
std::vector<std::string> ImportArchive(Group& group, const WeightArchive& archive) {
  ParamCollector c = CollectParams(group);
  // Validate everything before touching the group.
  for (auto& p : c.params) CheckNamedArray(archive, p.name, p.var.shape());
  for (auto& b : c.buffers) CheckNamedArray(archive, b.name, b.tensor->shape());
  std::map<std::string, bool> used;
  for (auto& p : c.params) {
    p.var.mutable_value() = archive.arrays.at(p.name);
    used[p.name] = true;
  }
  for (auto& b : c.buffers) {
    *b.tensor = archive.arrays.at(b.name);
    used[b.name] = true;
  }
  std::vector<std::string> unknown;
  for (const auto& [name, t] : archive.arrays) {
    if (!used.count(name)) unknown.push_back(name);
  }
  return unknown;
}

}  // namespace dmanet

#endif  // DMANET_WEIGHT_ARCHIVE_H_
