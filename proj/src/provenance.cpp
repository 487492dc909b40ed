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

#include "advdetect/provenance.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

#include "advdetect/error.hpp"

namespace advdetect {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr)) {
    throw Error(ErrorKind::FormatError, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string config_digest(const nlohmann::json& config) { return sha256_hex(config.dump()); }

nlohmann::json provenance(const nlohmann::json& config, const nlohmann::json& seeds) {
  return {{"tool_version", std::string(kToolVersion)}, {"config_digest", config_digest(config)}, {"seeds", seeds}};
}

}  // namespace advdetect
