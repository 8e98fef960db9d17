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

#ifndef MARROW_WSI_IO_HPP_
#define MARROW_WSI_IO_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "marrow/image.hpp"

namespace marrow {

/// Level-0 pixel reader behind a SlideHandle. Implementations must allow
/// concurrent read_region calls.
class SlideSource {
 public:
  virtual ~SlideSource() = default;

  /// Reads [x, x+w) x [y, y+h); the window must lie inside the slide.
  virtual RgbImage read_region(std::int64_t x, std::int64_t y, int w, int h) const = 0;
};

struct SlideHandle {
  std::string id;
  std::int64_t width_px = 0;
  std::int64_t height_px = 0;
  std::optional<double> mpp;
  std::string source;
  std::shared_ptr<const SlideSource> reader;

  /// Bounds-checked read; throws kOutOfBounds for windows leaving the slide.
  RgbImage read_region(std::int64_t x, std::int64_t y, int w, int h) const;
};

/// Opens a directory-manifest slide (directory containing manifest.json, or
/// the manifest file itself) or a tiled RGB TIFF. Only headers are read.
SlideHandle open_slide(const std::filesystem::path& source);

struct GridCoord {
  int row = 0;
  int col = 0;

  friend bool operator==(const GridCoord&, const GridCoord&) = default;
  friend auto operator<=>(const GridCoord&, const GridCoord&) = default;
};

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
};

struct TileGrid {
  int rows = 15;
  int cols = 20;
  int tile_px = 512;
  std::int64_t slide_width = 0;
  std::int64_t slide_height = 0;

  double cell_width() const noexcept { return static_cast<double>(slide_width) / cols; }
  double cell_height() const noexcept { return static_cast<double>(slide_height) / rows; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(rows) * cols; }
  bool contains(GridCoord c) const noexcept {
    return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols;
  }
  PixelPoint center(GridCoord c) const noexcept {
    return {(c.col + 0.5) * cell_width(), (c.row + 0.5) * cell_height()};
  }
  /// Top-left of the tile window for `c`, clamped so the window stays inside
  /// the slide. Requires tile_px <= slide dimensions.
  std::pair<std::int64_t, std::int64_t> tile_origin(GridCoord c) const noexcept;
  /// True when every cell is at least tile_px on both sides.
  bool cells_cover_tiles() const noexcept {
    return cell_width() >= tile_px && cell_height() >= tile_px;
  }
};

/// Builds the sampling grid. Throws kInvalidGeometry on non-positive
/// parameters or when the slide is smaller than one tile.
TileGrid make_grid(const SlideHandle& slide, int rows = 15, int cols = 20, int tile_px = 512);

struct Tile {
  GridCoord coord;
  std::int64_t origin_x = 0;
  std::int64_t origin_y = 0;
  RgbImage pixels;
  std::string slide_id;
};

Tile extract_tile(const SlideHandle& slide, const TileGrid& grid, GridCoord coord);

enum class TileOrder { kRowMajor, kSeededShuffle };

/// Visit order over all grid cells; deterministic for a given (order, seed).
std::vector<GridCoord> tile_order(const TileGrid& grid, TileOrder order, std::uint64_t seed = 0);

/// One element of a tile stream. A failed read carries the error text and
/// leaves `tile` empty; the stream continues.
struct TileResult {
  GridCoord coord;
  std::optional<Tile> tile;
  std::string error;
};

/// Ordered tile stream with a bounded read-ahead window. Reads run
/// concurrently but results are delivered strictly in visit order.
class TileStream {
 public:
  TileStream(SlideHandle slide, TileGrid grid, std::vector<GridCoord> order,
             std::size_t read_ahead = 4);

  std::optional<TileResult> next();
  std::size_t total() const noexcept { return order_.size(); }
  std::size_t delivered() const noexcept { return delivered_; }

 private:
  void refill();

  SlideHandle slide_;
  TileGrid grid_;
  std::vector<GridCoord> order_;
  std::size_t read_ahead_;
  std::size_t launched_ = 0;
  std::size_t delivered_ = 0;
  std::deque<std::future<TileResult>> pending_;
};

TileStream iterate_tiles(const SlideHandle& slide, const TileGrid& grid, TileOrder order,
                         std::uint64_t seed = 0, std::size_t read_ahead = 4);

/// Produces the level-0 pixels of the window [x, x+w) x [y, y+h).
using RegionRenderer = std::function<RgbImage(std::int64_t x, std::int64_t y, int w, int h)>;

/// Writes a directory-manifest slide: manifest.json plus one PNG per
/// `chunk_px` square chunk.
void write_manifest_slide(const std::filesystem::path& dir, const std::string& slide_id,
                          std::int64_t width_px, std::int64_t height_px,
                          const RegionRenderer& render, int chunk_px = 1024);

/// Writes a baseline tiled RGB TIFF (deflate-compressed, level 0 only).
void write_tiled_tiff(const std::filesystem::path& path, std::int64_t width_px,
                      std::int64_t height_px, const RegionRenderer& render, int tile_px = 256);

}  // namespace marrow

#endif  // MARROW_WSI_IO_HPP_
