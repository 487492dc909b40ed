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
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace advdetect {

inline constexpr std::string_view kToolVersion = "0.1.0";

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// Digest of a configuration object in canonical (key-sorted, compact) form.
std::string config_digest(const nlohmann::json& config);

/// Metadata block embedded in every persisted artifact.
nlohmann::json provenance(const nlohmann::json& config, const nlohmann::json& seeds);

}  // namespace advdetect
