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

#include "advdetect/image_ops.hpp"

#include <charconv>
#include <sstream>

#include "advdetect/codec.hpp"

namespace advdetect {

std::vector<detail::ResampleTaps> detail::bilinear_taps(int in_size, int out_size) {
  const double ratio = static_cast<double>(in_size) / out_size;
  const double widen = std::max(ratio, 1.0);
  std::vector<ResampleTaps> taps(static_cast<std::size_t>(out_size));
  for (int i = 0; i < out_size; ++i) {
    const double centre = (i + 0.5) * ratio;
    const int lo = std::max(static_cast<int>(std::floor(centre - widen)), 0);
    const int hi = std::min(static_cast<int>(std::ceil(centre + widen)), in_size);
    ResampleTaps& t = taps[static_cast<std::size_t>(i)];
    double total = 0.0;
    for (int j = lo; j < hi; ++j) {
      const double wgt = std::max(0.0, 1.0 - std::abs((j + 0.5 - centre) / widen));
      if (t.weights.empty() && wgt == 0.0) continue;
      if (t.weights.empty()) t.first = j;
      t.weights.push_back(wgt);
      total += wgt;
    }
    while (!t.weights.empty() && t.weights.back() == 0.0) t.weights.pop_back();
    for (double& wgt : t.weights) wgt /= total;
  }
  return taps;
}

int scaled_dimension(int dim, double factor) {
  const long out = std::lround(dim * factor);
  if (out < 1) throw Error(ErrorKind::DegenerateOutput, "scaling produces a zero dimension");
  return static_cast<int>(out);
}

std::string to_string(OpFamily family) {
  switch (family) {
    case OpFamily::JpegCompress: return "jpeg";
    case OpFamily::GaussianBlur: return "blur";
    case OpFamily::Rotate: return "rotate";
    case OpFamily::Scale: return "scale";
  }
  return "unknown";
}

std::string OperationSpec::name() const {
  std::ostringstream os;
  os << to_string(family) << ':' << parameter;
  return os.str();
}

OperationSpec parse_operation(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(ErrorKind::InvalidArgument, "operation must be family:parameter");
  const std::string family = text.substr(0, colon);
  OperationSpec op;
  try {
    std::size_t used = 0;
    op.parameter = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidArgument, "bad operation parameter in '" + text + "'");
  }
  if (family == "jpeg") {
    op.family = OpFamily::JpegCompress;
    if (op.parameter < 1 || op.parameter > 100 || op.parameter != std::floor(op.parameter)) {
      throw Error(ErrorKind::InvalidArgument, "JPEG quality must be an integer in 1..100");
    }
  } else if (family == "blur") {
    op.family = OpFamily::GaussianBlur;
  } else if (family == "rotate") {
    op.family = OpFamily::Rotate;
  } else if (family == "scale") {
    op.family = OpFamily::Scale;
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown operation family '" + family + "'");
  }
  if (op.family != OpFamily::Rotate && !(op.parameter > 0)) {
    throw Error(ErrorKind::InvalidArgument, "operation parameter must be positive: " + text);
  }
  return op;
}

const OperationSuite& canonical_suite() {
  static const OperationSuite suite = [] {
    OperationSuite s;
    auto push = [&s](OpFamily f, double p) { s.push_back({f, p, static_cast<int>(s.size()) + 1}); };
    for (int q = 100; q >= 25; q -= 5) push(OpFamily::JpegCompress, q);
    for (int r = 2; r <= 5; ++r) push(OpFamily::GaussianBlur, r);
    for (int a = 1; a <= 8; ++a) push(OpFamily::Rotate, a);
    for (double f : {0.75, 0.8, 0.85, 0.9, 0.95, 1.05, 1.1, 1.15, 1.2, 1.25}) push(OpFamily::Scale, f);
    return s;
  }();
  return suite;
}

Image jpeg_roundtrip(const Image& img, int quality) {
  return dequantize(decode_jpeg(encode_jpeg(quantize(img), quality)));
}

Image jpeg_roundtrip_q100(const Image& img) {
  validate(img);
  return jpeg_roundtrip(img, 100);
}

Image apply(const OperationSpec& op, const Image& img) {
  validate(img);
  switch (op.family) {
    case OpFamily::JpegCompress:
      return jpeg_roundtrip(img, static_cast<int>(op.parameter));
    case OpFamily::GaussianBlur:
      return gaussian_blur(img, op.parameter);
    case OpFamily::Rotate:
      return rotate_clockwise(img, op.parameter);
    case OpFamily::Scale:
      return scale_by(img, op.parameter);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown operation family");
}

}  // namespace advdetect
