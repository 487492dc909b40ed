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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "advdetect/error.hpp"

namespace advdetect {

/// Three-channel image with interleaved (row, column, channel) storage.
/// Intensities live in [0,1]; an 8-bit view exists only at codec boundaries.
template <typename Scalar>
class BasicImage {
 public:
  static constexpr int kChannels = 3;
  static constexpr int kMinSide = 8;

  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using PlaneMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0,
                              Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
  using ConstPlaneMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0,
                 Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;

  BasicImage() = default;

  BasicImage(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw Error(ErrorKind::InvalidImage, "image dimensions must be positive");
    }
    data_ = Array::Zero(static_cast<Eigen::Index>(width) * height * kChannels);
  }

  BasicImage(int width, int height, Array data) : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1 || data_.size() != static_cast<Eigen::Index>(width) * height * kChannels) {
      throw Error(ErrorKind::InvalidImage, "pixel buffer does not match dimensions");
    }
  }

  static BasicImage constant(int width, int height, Scalar value) {
    BasicImage img(width, height);
    img.data_.setConstant(value);
    return img;
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  Eigen::Index size() const noexcept { return data_.size(); }

  Scalar& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  Scalar at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  Array& pixels() noexcept { return data_; }
  const Array& pixels() const noexcept { return data_; }

  PlaneMap plane(int c) {
    return PlaneMap(data_.data() + c, height_, width_,
                    Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(width_ * kChannels, kChannels));
  }
  ConstPlaneMap plane(int c) const {
    return ConstPlaneMap(data_.data() + c, height_, width_,
                         Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(width_ * kChannels, kChannels));
  }

  template <typename Other>
  BasicImage<Other> cast() const {
    return BasicImage<Other>(width_, height_, data_.template cast<Other>());
  }

  bool same_shape(const BasicImage& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const BasicImage& a, const BasicImage& b) {
    return a.same_shape(b) && (a.data_ == b.data_).all();
  }

 private:
  Eigen::Index index(int y, int x, int c) const noexcept {
    return (static_cast<Eigen::Index>(y) * width_ + x) * kChannels + c;
  }

  int width_ = 0;
  int height_ = 0;
  Array data_;
};

using Image = BasicImage<double>;

/// Throws InvalidImage unless the image is at least 8x8 with every
/// intensity finite and inside [0,1].
template <typename Scalar>
void validate(const BasicImage<Scalar>& img) {
  if (img.width() < BasicImage<Scalar>::kMinSide || img.height() < BasicImage<Scalar>::kMinSide) {
    throw Error(ErrorKind::InvalidImage, "image must be at least 8x8, got " + std::to_string(img.width()) +
                                             "x" + std::to_string(img.height()));
  }
  const auto& p = img.pixels();
  if (!p.allFinite() || (p < Scalar(0)).any() || (p > Scalar(1)).any()) {
    throw Error(ErrorKind::InvalidImage, "intensities must be finite and inside [0,1]");
  }
}

/// Interleaved 8-bit RGB view used by the codecs.
struct Rgb8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bytes;
};

template <typename Scalar>
Rgb8 quantize(const BasicImage<Scalar>& img) {
  Rgb8 out{img.width(), img.height(), std::vector<std::uint8_t>(static_cast<std::size_t>(img.size()))};
  const auto& p = img.pixels();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double v = std::clamp(static_cast<double>(p[i]), 0.0, 1.0);
    out.bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

template <typename Scalar = double>
BasicImage<Scalar> dequantize(const Rgb8& raw) {
  BasicImage<Scalar> img(raw.width, raw.height);
  if (raw.bytes.size() != static_cast<std::size_t>(img.size())) {
    throw Error(ErrorKind::InvalidImage, "8-bit buffer does not match dimensions");
  }
  auto& p = img.pixels();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    p[i] = static_cast<Scalar>(raw.bytes[static_cast<std::size_t>(i)]) / Scalar(255);
  }
  return img;
}

/// Peak signal-to-noise ratio in dB on the [0,1] scale.
template <typename Scalar>
double psnr(const BasicImage<Scalar>& a, const BasicImage<Scalar>& b) {
  const double mse = (a.pixels() - b.pixels()).square().mean();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace advdetect
