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

#include "advdetect/binary_io.hpp"

#include <zlib.h>

namespace advdetect {

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

std::vector<std::uint8_t> BinaryWriter::finish() {
  put_u32(crc32_of(buf_));
  return std::move(buf_);
}

BinaryReader::BinaryReader(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorKind::FormatError, "file too short");
  const auto payload = bytes.first(bytes.size() - 4);
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[payload.size() + i]) << (8 * i);
  if (stored != crc32_of(payload)) throw Error(ErrorKind::FormatError, "checksum mismatch");
  bytes_ = payload;
}

void BinaryReader::need(std::size_t n) const {
  if (pos_ + n > bytes_.size()) throw Error(ErrorKind::FormatError, "truncated file");
}

void BinaryReader::expect_magic(std::string_view magic) {
  need(magic.size());
  if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0) {
    throw Error(ErrorKind::FormatError, "bad magic, expected " + std::string(magic));
  }
  pos_ += magic.size();
}

std::uint8_t BinaryReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint32_t BinaryReader::u32() { return get_le<std::uint32_t>(); }
std::uint64_t BinaryReader::u64() { return get_le<std::uint64_t>(); }

double BinaryReader::f64() {
  const std::uint64_t bits = get_le<std::uint64_t>();
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string BinaryReader::string() {
  const auto n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

Eigen::MatrixXd BinaryReader::dense(Eigen::Index rows, Eigen::Index cols) {
  need(static_cast<std::size_t>(rows * cols) * 8);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
  return m;
}

void BinaryReader::expect_end() const {
  if (pos_ != bytes_.size()) throw Error(ErrorKind::FormatError, "trailing bytes in file");
}

}  // namespace advdetect
