// Copyright 2026 The dfx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dfx::synthface {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // RGB interleaved in [0, 1]
};

/// Lossless PNG encoding of float RGB in [0,1], quantized to bit_depth
/// (8 or 16) bits per channel.
std::vector<std::uint8_t> encode_png(const RgbImage& image, int bit_depth);
void write_png(const std::filesystem::path& path, const RgbImage& image,
               int bit_depth);

/// Decodes 8- or 16-bit RGB/RGBA/gray PNGs to float RGB.
RgbImage decode_png(const std::vector<std::uint8_t>& bytes);
RgbImage read_png(const std::filesystem::path& path);

}  // namespace dfx::synthface
