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

#include "advdetect/codec.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

namespace advdetect {
namespace {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silence(j_common_ptr, int) {}

// The setjmp frames below hold only trivially destructible locals; every
// owning buffer lives in the caller.
bool compress_into(const Rgb8& raw, int quality, unsigned char** out, unsigned long* out_size,
                   JpegErrorManager& err) {
  jpeg_compress_struct cinfo;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.emit_message = jpeg_silence;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, out, out_size);
  cinfo.image_width = static_cast<JDIMENSION>(raw.width);
  cinfo.image_height = static_cast<JDIMENSION>(raw.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  cinfo.dct_method = JDCT_ISLOW;
  jpeg_set_quality(&cinfo, quality, TRUE);
  if (quality >= kFullChromaQuality) {
    for (int c = 0; c < 3; ++c) cinfo.comp_info[c].h_samp_factor = cinfo.comp_info[c].v_samp_factor = 1;
  }
  jpeg_start_compress(&cinfo, TRUE);
  const auto stride = static_cast<std::size_t>(raw.width) * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(raw.bytes.data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  return true;
}

bool decompress_into(std::span<const std::uint8_t> bytes, Rgb8& out, JpegErrorManager& err) {
  jpeg_decompress_struct cinfo;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.emit_message = jpeg_silence;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  cinfo.dct_method = JDCT_ISLOW;
  jpeg_start_decompress(&cinfo);
  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  const auto stride = static_cast<std::size_t>(out.width) * 3;
  out.bytes.resize(stride * static_cast<std::size_t>(out.height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPLE* row = out.bytes.data() + cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

void check_raw(const Rgb8& raw) {
  if (raw.width < 1 || raw.height < 1 ||
      raw.bytes.size() != static_cast<std::size_t>(raw.width) * static_cast<std::size_t>(raw.height) * 3) {
    throw Error(ErrorKind::EncodingFailure, "malformed 8-bit image buffer");
  }
}

}  // namespace

Bytes encode_jpeg(const Rgb8& raw, int quality) {
  check_raw(raw);
  if (quality < 1 || quality > 100) {
    throw Error(ErrorKind::EncodingFailure, "JPEG quality out of range: " + std::to_string(quality));
  }
  JpegErrorManager err{};
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  const bool ok = compress_into(raw, quality, &buffer, &size, err);
  Bytes out;
  if (ok) out.assign(buffer, buffer + size);
  std::free(buffer);
  if (!ok) throw Error(ErrorKind::EncodingFailure, err.message);
  return out;
}

Rgb8 decode_jpeg(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error(ErrorKind::EncodingFailure, "empty JPEG stream");
  JpegErrorManager err{};
  Rgb8 out;
  if (!decompress_into(bytes, out, err)) throw Error(ErrorKind::EncodingFailure, err.message);
  return out;
}

Bytes encode_png(const Rgb8& raw) {
  check_raw(raw);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raw.width);
  image.height = static_cast<png_uint_32>(raw.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, raw.bytes.data(), 0, nullptr)) {
    throw Error(ErrorKind::EncodingFailure, image.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, raw.bytes.data(), 0, nullptr)) {
    throw Error(ErrorKind::EncodingFailure, image.message);
  }
  out.resize(size);
  return out;
}

Rgb8 decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorKind::EncodingFailure, image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Rgb8 out{static_cast<int>(image.width), static_cast<int>(image.height), {}};
  out.bytes.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.bytes.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorKind::EncodingFailure, image.message);
  }
  return out;
}

std::string codec_info() {
#ifdef LIBJPEG_TURBO_VERSION
#define ADVDETECT_STR2(x) #x
#define ADVDETECT_STR(x) ADVDETECT_STR2(x)
  return "libjpeg-turbo " ADVDETECT_STR(LIBJPEG_TURBO_VERSION) " (jpeglib " +
         std::to_string(JPEG_LIB_VERSION) + ", islow dct, 4:4:4 at q>=90 else 4:2:0)";
#else
  return "libjpeg " + std::to_string(JPEG_LIB_VERSION) + " (islow dct, 4:4:4 at q>=90 else 4:2:0)";
#endif
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingInput, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::FormatError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image load_image(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  const Bytes bytes = read_file(path);
  if (ext == ".png") return dequantize(decode_png(bytes));
  if (ext == ".jpg" || ext == ".jpeg") return dequantize(decode_jpeg(bytes));
  throw Error(ErrorKind::FormatError, "unsupported image extension: " + path.string());
}

void save_png(const std::filesystem::path& path, const Image& img) { write_file(path, encode_png(quantize(img))); }

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorKind::ProtocolViolation, "base64 payload length not a multiple of 4");
  Bytes out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorKind::ProtocolViolation, "invalid base64 payload");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

}  // namespace advdetect
