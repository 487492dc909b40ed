// Copyright 2026 The advdetect Authors. All Rights Reserved.
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
#include <span>
#include <string>
#include <vector>

#include "advdetect/image.hpp"

namespace advdetect {

using Bytes = std::vector<std::uint8_t>;

/// Qualities at or above this keep full-resolution chroma (4:4:4); lower
/// ones subsample it 4:2:0.
inline constexpr int kFullChromaQuality = 90;

/// Baseline-DCT JPEG at the given 1..100 quality (libjpeg scale, islow DCT).
Bytes encode_jpeg(const Rgb8& raw, int quality);
Rgb8 decode_jpeg(std::span<const std::uint8_t> bytes);

Bytes encode_png(const Rgb8& raw);
Rgb8 decode_png(std::span<const std::uint8_t> bytes);

/// Identifier of the linked JPEG codec, recorded in dataset manifests.
std::string codec_info();

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Decodes a .png/.jpg/.jpeg file into a floating point image.
Image load_image(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Image& img);

std::string base64_encode(std::span<const std::uint8_t> bytes);
Bytes base64_decode(std::string_view text);

}  // namespace advdetect
