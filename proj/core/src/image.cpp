// Copyright 2026 The Marrow Authors. All Rights Reserved.
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

#include "marrow/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "marrow/error.hpp"

namespace marrow {

RgbImage::RgbImage(int width, int height, Rgb fill_color)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    fail(ErrorCode::kInvalidGeometry, "negative image dimensions");
  }
  data_.resize(static_cast<std::size_t>(width) * height * 3);
  fill(fill_color);
}

void RgbImage::fill(Rgb c) noexcept {
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = c.r;
    data_[i + 1] = c.g;
    data_[i + 2] = c.b;
  }
}

void RgbImage::fill_rect(int x0, int y0, int x1, int y1, Rgb c) noexcept {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, width_);
  y1 = std::min(y1, height_);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) set(x, y, c);
  }
}

RgbImage RgbImage::crop(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > width_ || y + h > height_) {
    fail(ErrorCode::kOutOfBounds, "crop window outside image");
  }
  RgbImage out(w, h);
  for (int row = 0; row < h; ++row) {
    std::memcpy(out.row(row).data(), &data_[offset(x, y + row)],
                static_cast<std::size_t>(w) * 3);
  }
  return out;
}

void RgbImage::paste(const RgbImage& src, int x, int y) noexcept {
  const int sx0 = std::max(0, -x);
  const int sy0 = std::max(0, -y);
  const int sx1 = std::min(src.width(), width_ - x);
  const int sy1 = std::min(src.height(), height_ - y);
  if (sx1 <= sx0 || sy1 <= sy0) return;
  for (int sy = sy0; sy < sy1; ++sy) {
    std::memcpy(&data_[offset(x + sx0, y + sy)], &src.data_[src.offset(sx0, sy)],
                static_cast<std::size_t>(sx1 - sx0) * 3);
  }
}

RgbImage RgbImage::resized(int new_width, int new_height) const {
  if (new_width <= 0 || new_height <= 0 || empty()) {
    fail(ErrorCode::kInvalidGeometry, "resize to empty image");
  }
  if (new_width == width_ && new_height == height_) return *this;
  RgbImage out(new_width, new_height);
  const double sx = static_cast<double>(width_) / new_width;
  const double sy = static_cast<double>(height_) / new_height;
  for (int y = 0; y < new_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, height_ - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double ty = fy - y0;
    for (int x = 0; x < new_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, width_ - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, width_ - 1);
      const double tx = fx - x0;
      std::array<std::uint8_t, 3> px{};
      for (int ch = 0; ch < 3; ++ch) {
        const double a = data_[offset(x0, y0) + ch] * (1 - tx) + data_[offset(x1, y0) + ch] * tx;
        const double b = data_[offset(x0, y1) + ch] * (1 - tx) + data_[offset(x1, y1) + ch] * tx;
        px[ch] = static_cast<std::uint8_t>(std::lround(a * (1 - ty) + b * ty));
      }
      out.set(x, y, {px[0], px[1], px[2]});
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(image.width());
  desc.height = static_cast<png_uint_32>(image.height());
  desc.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, image.bytes().data(), 0, nullptr)) {
    fail(ErrorCode::kIoError, std::string("png sizing failed: ") + desc.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, image.bytes().data(), 0, nullptr)) {
    fail(ErrorCode::kIoError, std::string("png encode failed: ") + desc.message);
  }
  out.resize(size);
  return out;
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&desc, bytes.data(), bytes.size())) {
    fail(ErrorCode::kCorruptHeader, std::string("png header: ") + desc.message);
  }
  desc.format = PNG_FORMAT_RGB;
  RgbImage out(static_cast<int>(desc.width), static_cast<int>(desc.height));
  if (!png_image_finish_read(&desc, nullptr, out.bytes().data(), 0, nullptr)) {
    png_image_free(&desc);
    fail(ErrorCode::kReadFailure, std::string("png decode: ") + desc.message);
  }
  return out;
}

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kNotFound, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::pair<int, int> png_dimensions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kNotFound, "cannot open " + path.string());
  std::array<std::uint8_t, 24> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  static constexpr std::array<std::uint8_t, 8> kSig = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (in.gcount() < 24 || !std::equal(kSig.begin(), kSig.end(), head.begin()) ||
      std::memcmp(&head[12], "IHDR", 4) != 0) {
    fail(ErrorCode::kCorruptHeader, "not a PNG file: " + path.string());
  }
  auto be32 = [&](int at) {
    return static_cast<int>((head[at] << 24) | (head[at + 1] << 16) | (head[at + 2] << 8) | head[at + 3]);
  };
  return {be32(16), be32(20)};
}

RgbImage read_png(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  return decode_png(bytes);
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace marrow
