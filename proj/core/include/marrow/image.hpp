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

#ifndef MARROW_IMAGE_HPP_
#define MARROW_IMAGE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace marrow {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Interleaved 8-bit RGB raster, row-major, no padding.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {255, 255, 255});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const noexcept {
    const std::uint8_t* p = &data_[offset(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) noexcept {
    std::uint8_t* p = &data_[offset(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  std::span<const std::uint8_t> bytes() const noexcept { return data_; }
  std::span<std::uint8_t> bytes() noexcept { return data_; }
  std::span<const std::uint8_t> row(int y) const noexcept {
    return std::span<const std::uint8_t>(data_).subspan(
        static_cast<std::size_t>(y) * width_ * 3, static_cast<std::size_t>(width_) * 3);
  }
  std::span<std::uint8_t> row(int y) noexcept {
    return std::span<std::uint8_t>(data_).subspan(
        static_cast<std::size_t>(y) * width_ * 3, static_cast<std::size_t>(width_) * 3);
  }

  void fill(Rgb c) noexcept;
  void fill_rect(int x0, int y0, int x1, int y1, Rgb c) noexcept;

  /// Copy of the [x, x+w) x [y, y+h) window; must lie inside the image.
  RgbImage crop(int x, int y, int w, int h) const;

  /// Copies `src` with its top-left at (x, y); parts outside are dropped.
  void paste(const RgbImage& src, int x, int y) noexcept;

  /// Bilinear resample to the requested size.
  RgbImage resized(int new_width, int new_height) const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Lossless PNG encoding, the on-disk and on-wire raster format.
std::vector<std::uint8_t> encode_png(const RgbImage& image);
RgbImage decode_png(std::span<const std::uint8_t> bytes);

/// Reads only the IHDR chunk; returns {width, height}.
std::pair<int, int> png_dimensions(const std::filesystem::path& path);

RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace marrow

#endif  // MARROW_IMAGE_HPP_
