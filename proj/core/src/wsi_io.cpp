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

#include "marrow/wsi_io.hpp"

#include <tiffio.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <list>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <nlohmann/json.hpp>

#include "marrow/error.hpp"

namespace marrow {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

/// Small thread-safe LRU cache of decoded chunks keyed by chunk index.
class ChunkCache {
 public:
  explicit ChunkCache(std::size_t capacity) : capacity_(capacity) {}

  std::shared_ptr<const RgbImage> get_or_load(
      std::size_t key, const std::function<RgbImage()>& load) const {
    {
      std::lock_guard lock(mu_);
      auto it = index_.find(key);
      if (it != index_.end()) {
        order_.splice(order_.begin(), order_, it->second);
        return it->second->second;
      }
    }
    auto img = std::make_shared<const RgbImage>(load());
    std::lock_guard lock(mu_);
    if (index_.find(key) == index_.end()) {
      order_.emplace_front(key, img);
      index_[key] = order_.begin();
      if (order_.size() > capacity_) {
        index_.erase(order_.back().first);
        order_.pop_back();
      }
    }
    return img;
  }

 private:
  using Entry = std::pair<std::size_t, std::shared_ptr<const RgbImage>>;
  std::size_t capacity_;
  mutable std::mutex mu_;
  mutable std::list<Entry> order_;
  mutable std::map<std::size_t, std::list<Entry>::iterator> index_;
};

struct ManifestChunk {
  std::int64_t x = 0;
  std::int64_t y = 0;
  int w = 0;
  int h = 0;
  fs::path file;
};

class ManifestSource final : public SlideSource {
 public:
  ManifestSource(std::vector<ManifestChunk> chunks) : chunks_(std::move(chunks)), cache_(32) {}

  RgbImage read_region(std::int64_t x, std::int64_t y, int w, int h) const override {
    RgbImage out(w, h, {255, 255, 255});
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
      const auto& c = chunks_[i];
      if (c.x >= x + w || c.x + c.w <= x || c.y >= y + h || c.y + c.h <= y) continue;
      auto img = cache_.get_or_load(i, [&] {
        RgbImage loaded = read_png(c.file);
        if (loaded.width() != c.w || loaded.height() != c.h) {
          fail(ErrorCode::kReadFailure, "tile size mismatch in " + c.file.string());
        }
        return loaded;
      });
      out.paste(*img, static_cast<int>(c.x - x), static_cast<int>(c.y - y));
    }
    return out;
  }

 private:
  std::vector<ManifestChunk> chunks_;
  ChunkCache cache_;
};

void quiet_tiff_handler(const char*, const char*, va_list) {}

void install_tiff_handlers() {
  static std::once_flag once;
  std::call_once(once, [] {
    TIFFSetWarningHandler(quiet_tiff_handler);
    TIFFSetErrorHandler(quiet_tiff_handler);
  });
}

class TiffSource final : public SlideSource {
 public:
  TiffSource(TIFF* tif, std::int64_t width, std::int64_t height, int tile_w, int tile_h)
      : tif_(tif), width_(width), height_(height), tile_w_(tile_w), tile_h_(tile_h), cache_(64) {}
  ~TiffSource() override { TIFFClose(tif_); }
  TiffSource(const TiffSource&) = delete;
  TiffSource& operator=(const TiffSource&) = delete;

  RgbImage read_region(std::int64_t x, std::int64_t y, int w, int h) const override {
    RgbImage out(w, h);
    const std::int64_t tx0 = x / tile_w_;
    const std::int64_t ty0 = y / tile_h_;
    const std::int64_t tx1 = (x + w - 1) / tile_w_;
    const std::int64_t ty1 = (y + h - 1) / tile_h_;
    for (std::int64_t ty = ty0; ty <= ty1; ++ty) {
      for (std::int64_t tx = tx0; tx <= tx1; ++tx) {
        auto tile = cache_.get_or_load(
            static_cast<std::size_t>(ty * tiles_across() + tx), [&] { return load_tile(tx, ty); });
        out.paste(*tile, static_cast<int>(tx * tile_w_ - x), static_cast<int>(ty * tile_h_ - y));
      }
    }
    return out;
  }

 private:
  std::int64_t tiles_across() const { return (width_ + tile_w_ - 1) / tile_w_; }

  RgbImage load_tile(std::int64_t tx, std::int64_t ty) const {
    RgbImage img(tile_w_, tile_h_);
    std::lock_guard lock(mu_);
    const ttile_t index = TIFFComputeTile(tif_, static_cast<uint32_t>(tx * tile_w_),
                                          static_cast<uint32_t>(ty * tile_h_), 0, 0);
    const tmsize_t want = static_cast<tmsize_t>(img.bytes().size());
    if (TIFFReadEncodedTile(tif_, index, img.bytes().data(), want) < 0) {
      fail(ErrorCode::kReadFailure, "failed to decode TIFF tile " + std::to_string(index));
    }
    return img;
  }

  TIFF* tif_;
  std::int64_t width_;
  std::int64_t height_;
  int tile_w_;
  int tile_h_;
  mutable std::mutex mu_;
  ChunkCache cache_;
};

SlideHandle open_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorCode::kNotFound, "cannot open " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorruptHeader, "manifest is not valid JSON: " + std::string(e.what()));
  }
  SlideHandle handle;
  std::vector<ManifestChunk> chunks;
  try {
    handle.width_px = doc.at("width_px").get<std::int64_t>();
    handle.height_px = doc.at("height_px").get<std::int64_t>();
    if (doc.contains("mpp") && !doc["mpp"].is_null()) handle.mpp = doc["mpp"].get<double>();
    handle.id = doc.value("slide_id", manifest_path.parent_path().filename().string());
    const fs::path base = manifest_path.parent_path();
    for (const auto& entry : doc.at("tile_index")) {
      ManifestChunk c;
      c.x = entry.at("x").get<std::int64_t>();
      c.y = entry.at("y").get<std::int64_t>();
      c.file = base / entry.at("file").get<std::string>();
      if (entry.contains("w") && entry.contains("h")) {
        c.w = entry["w"].get<int>();
        c.h = entry["h"].get<int>();
      } else {
        std::tie(c.w, c.h) = png_dimensions(c.file);
      }
      chunks.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorruptHeader, "manifest schema: " + std::string(e.what()));
  }
  if (handle.width_px <= 0 || handle.height_px <= 0) {
    fail(ErrorCode::kCorruptHeader, "manifest dimensions must be positive");
  }
  handle.source = manifest_path.string();
  handle.reader = std::make_shared<ManifestSource>(std::move(chunks));
  return handle;
}

SlideHandle open_tiff(const fs::path& path) {
  install_tiff_handlers();
  TIFF* tif = TIFFOpen(path.c_str(), "r");
  if (tif == nullptr) fail(ErrorCode::kCorruptHeader, "cannot parse TIFF header: " + path.string());
  auto close_and_fail = [&](ErrorCode code, const std::string& msg) {
    TIFFClose(tif);
    fail(code, msg + ": " + path.string());
  };
  uint32_t width = 0, height = 0, tw = 0, th = 0;
  uint16_t spp = 0, bps = 0, planar = PLANARCONFIG_CONTIG, photometric = 0;
  if (!TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &width) ||
      !TIFFGetField(tif, TIFFTAG_IMAGELENGTH, &height)) {
    close_and_fail(ErrorCode::kCorruptHeader, "TIFF lacks image dimensions");
  }
  if (!TIFFIsTiled(tif)) close_and_fail(ErrorCode::kUnsupportedFormat, "TIFF is not tiled");
  TIFFGetField(tif, TIFFTAG_TILEWIDTH, &tw);
  TIFFGetField(tif, TIFFTAG_TILELENGTH, &th);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif, TIFFTAG_BITSPERSAMPLE, &bps);
  TIFFGetFieldDefaulted(tif, TIFFTAG_PLANARCONFIG, &planar);
  TIFFGetField(tif, TIFFTAG_PHOTOMETRIC, &photometric);
  if (spp != 3 || bps != 8 || planar != PLANARCONFIG_CONTIG || photometric != PHOTOMETRIC_RGB) {
    close_and_fail(ErrorCode::kUnsupportedFormat, "only 8-bit contiguous RGB TIFF is supported");
  }
  if (width == 0 || height == 0 || tw == 0 || th == 0) {
    close_and_fail(ErrorCode::kCorruptHeader, "TIFF has zero dimensions");
  }
  SlideHandle handle;
  handle.id = path.stem().string();
  handle.width_px = width;
  handle.height_px = height;
  handle.source = path.string();
  float xres = 0.0f;
  uint16_t unit = RESUNIT_NONE;
  if (TIFFGetField(tif, TIFFTAG_XRESOLUTION, &xres) && xres > 0.0f) {
    TIFFGetFieldDefaulted(tif, TIFFTAG_RESOLUTIONUNIT, &unit);
    if (unit == RESUNIT_CENTIMETER) handle.mpp = 1.0e4 / xres;
    if (unit == RESUNIT_INCH) handle.mpp = 25400.0 / xres;
  }
  handle.reader = std::make_shared<TiffSource>(tif, width, height, static_cast<int>(tw),
                                               static_cast<int>(th));
  return handle;
}

bool has_tiff_magic(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() < 4) return false;
  return (magic[0] == 'I' && magic[1] == 'I' && magic[2] == 42 && magic[3] == 0) ||
         (magic[0] == 'M' && magic[1] == 'M' && magic[2] == 0 && magic[3] == 42) ||
         (magic[0] == 'I' && magic[1] == 'I' && magic[2] == 43 && magic[3] == 0);
}

}  // namespace

RgbImage SlideHandle::read_region(std::int64_t x, std::int64_t y, int w, int h) const {
  if (w <= 0 || h <= 0 || x < 0 || y < 0 || x + w > width_px || y + h > height_px) {
    fail(ErrorCode::kOutOfBounds, "region outside slide bounds");
  }
  if (!reader) fail(ErrorCode::kReadFailure, "slide handle has no reader");
  return reader->read_region(x, y, w, h);
}

SlideHandle open_slide(const fs::path& source) {
  std::error_code ec;
  if (!fs::exists(source, ec)) fail(ErrorCode::kNotFound, "no such slide: " + source.string());
  if (fs::is_directory(source)) {
    const fs::path manifest = source / "manifest.json";
    if (!fs::exists(manifest)) {
      fail(ErrorCode::kUnsupportedFormat, "directory has no manifest.json: " + source.string());
    }
    return open_manifest(manifest);
  }
  if (has_tiff_magic(source)) return open_tiff(source);
  if (source.extension() == ".json") return open_manifest(source);
  const auto ext = source.extension().string();
  if (ext == ".tif" || ext == ".tiff" || ext == ".svs") {
    fail(ErrorCode::kCorruptHeader, "file lacks a TIFF signature: " + source.string());
  }
  fail(ErrorCode::kUnsupportedFormat, "unrecognized slide container: " + source.string());
}

std::pair<std::int64_t, std::int64_t> TileGrid::tile_origin(GridCoord c) const noexcept {
  const PixelPoint ctr = center(c);
  const std::int64_t max_x = std::max<std::int64_t>(0, slide_width - tile_px);
  const std::int64_t max_y = std::max<std::int64_t>(0, slide_height - tile_px);
  const auto x = static_cast<std::int64_t>(std::floor(ctr.x - tile_px / 2.0));
  const auto y = static_cast<std::int64_t>(std::floor(ctr.y - tile_px / 2.0));
  return {std::clamp<std::int64_t>(x, 0, max_x), std::clamp<std::int64_t>(y, 0, max_y)};
}

TileGrid make_grid(const SlideHandle& slide, int rows, int cols, int tile_px) {
  if (rows <= 0 || cols <= 0 || tile_px <= 0) {
    fail(ErrorCode::kInvalidGeometry, "grid rows, cols and tile size must be positive");
  }
  if (slide.width_px < tile_px || slide.height_px < tile_px) {
    fail(ErrorCode::kInvalidGeometry, "slide smaller than one tile");
  }
  return TileGrid{rows, cols, tile_px, slide.width_px, slide.height_px};
}

Tile extract_tile(const SlideHandle& slide, const TileGrid& grid, GridCoord coord) {
  if (!grid.contains(coord)) {
    fail(ErrorCode::kOutOfGrid, "coord (" + std::to_string(coord.row) + "," +
                                    std::to_string(coord.col) + ") outside grid");
  }
  const auto [x, y] = grid.tile_origin(coord);
  Tile tile;
  tile.coord = coord;
  tile.origin_x = x;
  tile.origin_y = y;
  tile.slide_id = slide.id;
  try {
    tile.pixels = slide.read_region(x, y, grid.tile_px, grid.tile_px);
  } catch (const Error& e) {
    fail(ErrorCode::kReadFailure, std::string("tile read failed: ") + e.what());
  }
  return tile;
}

std::vector<GridCoord> tile_order(const TileGrid& grid, TileOrder order, std::uint64_t seed) {
  std::vector<GridCoord> coords;
  coords.reserve(grid.size());
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) coords.push_back({r, c});
  }
  if (order == TileOrder::kSeededShuffle) {
    // Fisher-Yates with an explicit engine draw so the permutation does not
    // depend on the standard library's shuffle implementation.
    std::mt19937_64 rng(seed);
    for (std::size_t i = coords.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(coords[i - 1], coords[j]);
    }
  }
  return coords;
}

TileStream::TileStream(SlideHandle slide, TileGrid grid, std::vector<GridCoord> order,
                       std::size_t read_ahead)
    : slide_(std::move(slide)),
      grid_(grid),
      order_(std::move(order)),
      read_ahead_(std::max<std::size_t>(1, read_ahead)) {}

void TileStream::refill() {
  while (launched_ < order_.size() && pending_.size() < read_ahead_) {
    const GridCoord coord = order_[launched_++];
    pending_.push_back(std::async(std::launch::async, [this, coord] {
      TileResult result{coord, std::nullopt, {}};
      try {
        result.tile = extract_tile(slide_, grid_, coord);
      } catch (const std::exception& e) {
        result.error = e.what();
      }
      return result;
    }));
  }
}

std::optional<TileResult> TileStream::next() {
  refill();
  if (pending_.empty()) return std::nullopt;
  TileResult result = pending_.front().get();
  pending_.pop_front();
  ++delivered_;
  refill();
  return result;
}

TileStream iterate_tiles(const SlideHandle& slide, const TileGrid& grid, TileOrder order,
                         std::uint64_t seed, std::size_t read_ahead) {
  return TileStream(slide, grid, tile_order(grid, order, seed), read_ahead);
}

void write_manifest_slide(const fs::path& dir, const std::string& slide_id, std::int64_t width_px,
                          std::int64_t height_px, const RegionRenderer& render, int chunk_px) {
  if (width_px <= 0 || height_px <= 0 || chunk_px <= 0) {
    fail(ErrorCode::kInvalidGeometry, "slide and chunk dimensions must be positive");
  }
  fs::create_directories(dir / "tiles");
  json index = json::array();
  for (std::int64_t y = 0; y < height_px; y += chunk_px) {
    for (std::int64_t x = 0; x < width_px; x += chunk_px) {
      const int w = static_cast<int>(std::min<std::int64_t>(chunk_px, width_px - x));
      const int h = static_cast<int>(std::min<std::int64_t>(chunk_px, height_px - y));
      const std::string name = "tiles/" + std::to_string(x) + "_" + std::to_string(y) + ".png";
      write_png(dir / name, render(x, y, w, h));
      index.push_back({{"x", x}, {"y", y}, {"w", w}, {"h", h}, {"file", name}});
    }
  }
  json doc = {{"slide_id", slide_id},
              {"width_px", width_px},
              {"height_px", height_px},
              {"tile_index", std::move(index)}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write manifest in " + dir.string());
  out << doc.dump(2) << '\n';
}

void write_tiled_tiff(const fs::path& path, std::int64_t width_px, std::int64_t height_px,
                      const RegionRenderer& render, int tile_px) {
  if (width_px <= 0 || height_px <= 0 || tile_px <= 0 || tile_px % 16 != 0) {
    fail(ErrorCode::kInvalidGeometry, "TIFF tile size must be a positive multiple of 16");
  }
  install_tiff_handlers();
  TIFF* tif = TIFFOpen(path.c_str(), "w");
  if (tif == nullptr) fail(ErrorCode::kIoError, "cannot create " + path.string());
  TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, static_cast<uint32_t>(width_px));
  TIFFSetField(tif, TIFFTAG_IMAGELENGTH, static_cast<uint32_t>(height_px));
  TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, 3);
  TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, 8);
  TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_RGB);
  TIFFSetField(tif, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif, TIFFTAG_COMPRESSION, COMPRESSION_ADOBE_DEFLATE);
  TIFFSetField(tif, TIFFTAG_TILEWIDTH, static_cast<uint32_t>(tile_px));
  TIFFSetField(tif, TIFFTAG_TILELENGTH, static_cast<uint32_t>(tile_px));
  for (std::int64_t y = 0; y < height_px; y += tile_px) {
    for (std::int64_t x = 0; x < width_px; x += tile_px) {
      const int w = static_cast<int>(std::min<std::int64_t>(tile_px, width_px - x));
      const int h = static_cast<int>(std::min<std::int64_t>(tile_px, height_px - y));
      RgbImage tile(tile_px, tile_px, {255, 255, 255});
      tile.paste(render(x, y, w, h), 0, 0);
      const ttile_t index = TIFFComputeTile(tif, static_cast<uint32_t>(x), static_cast<uint32_t>(y), 0, 0);
      if (TIFFWriteEncodedTile(tif, index, tile.bytes().data(),
                               static_cast<tmsize_t>(tile.bytes().size())) < 0) {
        TIFFClose(tif);
        fail(ErrorCode::kIoError, "failed to write TIFF tile");
      }
    }
  }
  TIFFClose(tif);
}

}  // namespace marrow
