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
#ifndef DMANET_PNG_IO_H_
#define DMANET_PNG_IO_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace dmanet {

struct Image8 {
  std::int64_t height = 0;
  std::int64_t width = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> data;  // interleaved rows
};

using Rgb = std::array<std::uint8_t, 3>;
using Palette = std::vector<Rgb>;

// Any PNG decoded to 8-bit RGB. Throws IoError.
Image8 ReadPngRgb(const std::string& path);
// Raw 8-bit samples of a grayscale or palette PNG (palette indices are not
// expanded). Throws IoError on other formats.
Image8 ReadPngIndices(const std::string& path);

void WritePngRgb(const std::string& path, const Image8& image);
void WritePngGray(const std::string& path, const Image8& image);
// 8-bit palette PNG whose pixel values are the given indices.
void WritePngIndexed(const std::string& path, const Image8& indices, const Palette& palette);

}  // namespace dmanet

#endif  // DMANET_PNG_IO_H_
