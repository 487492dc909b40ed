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

#include <Eigen/Core>

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advdetect/error.hpp"

namespace advdetect {

/// Little-endian writer for the versioned model files. `finish` appends a
/// CRC-32 of everything written so far.
class BinaryWriter {
 public:
  void put_bytes(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void put_magic(std::string_view magic) {
    put_bytes({reinterpret_cast<const std::uint8_t*>(magic.data()), magic.size()});
  }
  void put_u8(std::uint8_t v) { buf_.push_back(v); }
  void put_u32(std::uint32_t v) { put_le(v); }
  void put_u64(std::uint64_t v) { put_le(v); }
  void put_i32(std::int32_t v) { put_le(static_cast<std::uint32_t>(v)); }
  void put_f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_le(bits);
  }
  void put_string(std::string_view s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    put_bytes({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  }
  /// Row-major dump of a dense matrix or vector, preceded by nothing; the
  /// dimensions belong to the surrounding layout.
  template <typename Derived>
  void put_dense(const Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(static_cast<double>(m(r, c)));
  }

  std::vector<std::uint8_t> finish();

 private:
  template <typename T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

/// Reader counterpart; the constructor verifies the trailing CRC-32.
class BinaryReader {
 public:
  explicit BinaryReader(std::span<const std::uint8_t> bytes);

  void expect_magic(std::string_view magic);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64();
  std::string string();
  Eigen::MatrixXd dense(Eigen::Index rows, Eigen::Index cols);
  Eigen::VectorXd vector(Eigen::Index n) { return dense(n, 1); }
  /// Throws unless every payload byte was consumed.
  void expect_end() const;

 private:
  void need(std::size_t n) const;
  template <typename T>
  T get_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace advdetect
