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

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "advdetect/image.hpp"

namespace advdetect {

// Dense kernels, templated on scalar. Everything here is pure: inputs are
// taken by const reference and a fresh image is returned.

/// Normalized 1-D Gaussian with sigma = radius, truncated at two sigma.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gaussian_kernel(double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "blur radius must be positive");
  const double sigma = radius;
  const int half = static_cast<int>(std::ceil(2.0 * sigma));
  Eigen::Matrix<double, Eigen::Dynamic, 1> k(2 * half + 1);
  for (int i = -half; i <= half; ++i) k[i + half] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  k /= k.sum();
  return k.template cast<Scalar>();
}

/// Separable Gaussian blur with replicated borders, so constant images
/// stay constant.
template <typename Scalar>
BasicImage<Scalar> gaussian_blur(const BasicImage<Scalar>& img, double radius) {
  const auto kernel = gaussian_kernel<Scalar>(radius);
  const int half = static_cast<int>(kernel.size() / 2);
  const int w = img.width();
  const int h = img.height();
  BasicImage<Scalar> tmp(w, h);
  BasicImage<Scalar> out(w, h);
  for (int c = 0; c < BasicImage<Scalar>::kChannels; ++c) {
    const auto src = img.plane(c);
    auto mid = tmp.plane(c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        Scalar acc(0);
        for (int k = -half; k <= half; ++k) acc += kernel[k + half] * src(y, std::clamp(x + k, 0, w - 1));
        mid(y, x) = acc;
      }
    }
    auto dst = out.plane(c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        Scalar acc(0);
        for (int k = -half; k <= half; ++k) acc += kernel[k + half] * mid(std::clamp(y + k, 0, h - 1), x);
        dst(y, x) = acc;
      }
    }
  }
  return out;
}

/// Clockwise rotation about the image centre, bilinear sampling, black
/// fill. The canvas keeps its size.
template <typename Scalar>
BasicImage<Scalar> rotate_clockwise(const BasicImage<Scalar>& img, double degrees) {
  const int w = img.width();
  const int h = img.height();
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = degrees == 0.0 ? 1.0 : std::cos(theta);
  const double sn = degrees == 0.0 ? 0.0 : std::sin(theta);
  const double cx = 0.5 * (w - 1);
  const double cy = 0.5 * (h - 1);
  BasicImage<Scalar> out(w, h);
  for (int c = 0; c < BasicImage<Scalar>::kChannels; ++c) {
    const auto src = img.plane(c);
    auto dst = out.plane(c);
    auto sample = [&](int y, int x) -> double {
      return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : static_cast<double>(src(y, x));
    };
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Inverse map: rotate the destination offset counter-clockwise (y axis points down).
        const double dx = x - cx;
        const double dy = y - cy;
        const double sx = cs * dx + sn * dy + cx;
        const double sy = -sn * dx + cs * dy + cy;
        const int x0 = static_cast<int>(std::floor(sx));
        const int y0 = static_cast<int>(std::floor(sy));
        const double fx = sx - x0;
        const double fy = sy - y0;
        const double v = (1 - fx) * (1 - fy) * sample(y0, x0) + fx * (1 - fy) * sample(y0, x0 + 1) +
                         (1 - fx) * fy * sample(y0 + 1, x0) + fx * fy * sample(y0 + 1, x0 + 1);
        dst(y, x) = static_cast<Scalar>(v);
      }
    }
  }
  return out;
}

namespace detail {

/// Triangle-filter taps of one output sample: source range [first, first + weights.size()).
struct ResampleTaps {
  int first = 0;
  std::vector<double> weights;
};

/// Half-pixel aligned triangle filter whose support widens by the reduction
/// factor when shrinking; taps past the border are dropped and the rest
/// renormalized.
std::vector<ResampleTaps> bilinear_taps(int in_size, int out_size);

}  // namespace detail

/// Separable bilinear resize, antialiased when shrinking. A resize to the
/// same size is the identity.
template <typename Scalar>
BasicImage<Scalar> resize_bilinear(const BasicImage<Scalar>& img, int new_width, int new_height) {
  if (new_width < 1 || new_height < 1) throw Error(ErrorKind::DegenerateOutput, "resize to a zero dimension");
  const int h = img.height();
  const auto tx = detail::bilinear_taps(img.width(), new_width);
  const auto ty = detail::bilinear_taps(h, new_height);
  BasicImage<Scalar> tmp(new_width, h);
  BasicImage<Scalar> out(new_width, new_height);
  for (int c = 0; c < BasicImage<Scalar>::kChannels; ++c) {
    const auto src = img.plane(c);
    auto mid = tmp.plane(c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < new_width; ++x) {
        Scalar acc(0);
        for (std::size_t k = 0; k < tx[x].weights.size(); ++k) acc += tx[x].weights[k] * src(y, tx[x].first + static_cast<int>(k));
        mid(y, x) = acc;
      }
    }
    auto dst = out.plane(c);
    for (int y = 0; y < new_height; ++y) {
      for (int x = 0; x < new_width; ++x) {
        Scalar acc(0);
        for (std::size_t k = 0; k < ty[y].weights.size(); ++k) acc += ty[y].weights[k] * mid(ty[y].first + static_cast<int>(k), x);
        dst(y, x) = acc;
      }
    }
  }
  return out;
}

/// Output side length for a scale factor: round(d * s), at least 1.
int scaled_dimension(int dim, double factor);

template <typename Scalar>
BasicImage<Scalar> scale_by(const BasicImage<Scalar>& img, double factor) {
  if (!(factor > 0.0)) throw Error(ErrorKind::DegenerateOutput, "scale factor must be positive");
  return resize_bilinear(img, scaled_dimension(img.width(), factor), scaled_dimension(img.height(), factor));
}

// ---------------------------------------------------------------------------
// Operation suite

enum class OpFamily { JpegCompress, GaussianBlur, Rotate, Scale };

std::string to_string(OpFamily family);

struct OperationSpec {
  OpFamily family = OpFamily::JpegCompress;
  /// Quality, blur radius, clockwise degrees, or scale factor.
  double parameter = 100.0;
  /// 1-based position in its suite.
  int index = 1;

  /// Short stable name such as "jpeg:80" or "scale:0.75".
  std::string name() const;

  friend bool operator==(const OperationSpec&, const OperationSpec&) = default;
};

/// Parses names produced by OperationSpec::name(); index is left at 1.
OperationSpec parse_operation(const std::string& text);

using OperationSuite = std::vector<OperationSpec>;

inline constexpr int kSuiteVersion = 1;

/// The fixed 38-operation suite: JPEG(16), blur(4), rotation(8), scale(10).
const OperationSuite& canonical_suite();

/// Applies one operation to a valid image. JPEG goes through the 8-bit
/// codec; the other families stay in floating point.
Image apply(const OperationSpec& op, const Image& img);

Image jpeg_roundtrip(const Image& img, int quality);

/// Encode at quality 100 and decode: how adversarial images are persisted.
Image jpeg_roundtrip_q100(const Image& img);

}  // namespace advdetect
