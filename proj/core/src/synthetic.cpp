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

#include "marrow/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "marrow/error.hpp"
#include "marrow/hashing.hpp"

namespace marrow::synthetic {
namespace {

// Inset of the overstained blob inside its tile window.
constexpr int kOverstainInset = 24;

}  // namespace

Rgb nucleus_color(CellClass c) noexcept {
  return {static_cast<std::uint8_t>(40 + 8 * index_of(c)), 16, 150};
}

std::optional<CellClass> class_of_color(Rgb c) noexcept {
  if (c.g != 16 || c.b != 150 || c.r < 40 || (c.r - 40) % 8 != 0) return std::nullopt;
  return class_from_id((c.r - 40) / 8);
}

void render_cells(RgbImage& image, std::span<const PlantedCell> cells, std::int64_t ox,
                  std::int64_t oy) {
  for (const auto& cell : cells) {
    const double lx = cell.cx - static_cast<double>(ox);
    const double ly = cell.cy - static_cast<double>(oy);
    const int x0 = std::max(0, static_cast<int>(std::floor(lx - cell.radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(ly - cell.radius)));
    const int x1 = std::min(image.width() - 1, static_cast<int>(std::ceil(lx + cell.radius)));
    const int y1 = std::min(image.height() - 1, static_cast<int>(std::ceil(ly + cell.radius)));
    const Rgb color = nucleus_color(cell.cls);
    const double r2 = cell.radius * cell.radius;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - lx;
        const double dy = y + 0.5 - ly;
        if (dx * dx + dy * dy <= r2) image.set(x, y, color);
      }
    }
  }
}

std::vector<FoundObject> find_objects(const RgbImage& image, std::int64_t min_area) {
  const int w = image.width();
  const int h = image.height();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<FoundObject> out;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (seen[idx]) continue;
      seen[idx] = 1;
      const Rgb color = image.at(x, y);
      const auto cls = class_of_color(color);
      if (!cls) continue;
      FoundObject obj{*cls, x, y, x, y, 0};
      stack.clear();
      stack.emplace_back(x, y);
      while (!stack.empty()) {
        const auto [px, py] = stack.back();
        stack.pop_back();
        ++obj.area;
        obj.x0 = std::min(obj.x0, px);
        obj.y0 = std::min(obj.y0, py);
        obj.x1 = std::max(obj.x1, px);
        obj.y1 = std::max(obj.y1, py);
        constexpr std::array<std::pair<int, int>, 4> kNeighbours = {
            std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}};
        for (const auto& [dx, dy] : kNeighbours) {
          const int nx = px + dx;
          const int ny = py + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
          if (seen[nidx] || image.at(nx, ny) != color) continue;
          seen[nidx] = 1;
          stack.emplace_back(nx, ny);
        }
      }
      if (obj.area >= min_area) out.push_back(obj);
    }
  }
  std::sort(out.begin(), out.end(), [](const FoundObject& a, const FoundObject& b) {
    return std::tie(a.y0, a.x0, a.cls) < std::tie(b.y0, b.x0, b.cls);
  });
  return out;
}

double overstain_fraction(const RgbImage& image) noexcept {
  if (image.empty()) return 0.0;
  std::size_t n = 0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) n += image.at(x, y) == kOverstain;
  }
  return static_cast<double>(n) / (static_cast<double>(image.width()) * image.height());
}

std::array<double, kNumClasses> reference_class_counts() noexcept {
  return {2714, 1017, 1199, 409, 3950, 2668, 23, 1305, 569, 176,
          249,  7,    106,  5603, 191, 33,  3971, 585, 2007};
}

ClassSampler::ClassSampler(std::array<double, kNumClasses> weights, double mean_objects)
    : mean_objects_(mean_objects) {
  double total = 0.0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (weights[i] < 0.0) fail(ErrorCode::kInvalidConfig, "negative class weight");
    total += weights[i];
    cumulative_[i] = total;
  }
  if (total <= 0.0) fail(ErrorCode::kInvalidConfig, "class weights sum to zero");
  for (auto& c : cumulative_) c /= total;
  if (!(mean_objects >= 0.0)) fail(ErrorCode::kInvalidConfig, "mean objects must be >= 0");
}

std::vector<CellClass> ClassSampler::sample(std::uint64_t seed, std::uint64_t tile_key) const {
  std::mt19937_64 rng(mix_seed(seed, tile_key));
  std::vector<CellClass> out;
  if (mean_objects_ <= 0.0) return out;
  std::poisson_distribution<int> count(mean_objects_);
  const int n = count(rng);
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    // 53-bit uniform from the raw engine output.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    out.push_back(static_cast<CellClass>(std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative_.begin()), kNumClasses - 1)));
  }
  return out;
}

SyntheticSlide::SyntheticSlide(SlideSpec spec) : spec_(std::move(spec)) {
  if (spec_.rows <= 0 || spec_.cols <= 0 || spec_.tile_px <= 0) {
    fail(ErrorCode::kInvalidGeometry, "synthetic grid parameters must be positive");
  }
  if (spec_.width_px < static_cast<std::int64_t>(spec_.cols) * spec_.tile_px ||
      spec_.height_px < static_cast<std::int64_t>(spec_.rows) * spec_.tile_px) {
    fail(ErrorCode::kInvalidGeometry, "synthetic slide too small for non-overlapping tiles");
  }
  if (spec_.radius_min <= 0.0 || spec_.radius_max < spec_.radius_min ||
      2.0 * (spec_.radius_max + 2.0) >= spec_.tile_px) {
    fail(ErrorCode::kInvalidGeometry, "synthetic nucleus radii incompatible with tile size");
  }
  grid_ = TileGrid{spec_.rows, spec_.cols, spec_.tile_px, spec_.width_px, spec_.height_px};
  const std::size_t n = grid_.size();

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(mix_seed(spec_.seed, 0xA11CE));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
  const auto roi_n = static_cast<std::size_t>(
      std::llround(std::clamp(spec_.roi_fraction, 0.0, 1.0) * static_cast<double>(n)));
  kinds_.assign(n, TileKind::kBlank);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < roi_n) {
      kinds_[perm[i]] = TileKind::kRoi;
    } else if (mix_seed(spec_.seed, perm[i]) & 1U) {
      kinds_[perm[i]] = TileKind::kOverstained;
    }
  }

  ClassSampler sampler(spec_.class_weights, spec_.mean_objects);
  cell_ranges_.assign(n, {0, 0});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t begin = cells_.size();
    if (kinds_[i] == TileKind::kRoi) {
      const GridCoord coord{static_cast<int>(i / spec_.cols), static_cast<int>(i % spec_.cols)};
      const auto [ox, oy] = grid_.tile_origin(coord);
      std::mt19937_64 place(mix_seed(spec_.seed, 0x5EED0000ULL + i));
      auto uniform = [&](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(place() >> 11) * 0x1.0p-53);
      };
      const double margin = spec_.radius_max + 2.0;
      for (CellClass cls : sampler.sample(spec_.seed, i)) {
        for (int attempt = 0; attempt < 64; ++attempt) {
          const double r = uniform(spec_.radius_min, spec_.radius_max);
          const double x = uniform(margin, spec_.tile_px - margin);
          const double y = uniform(margin, spec_.tile_px - margin);
          const bool clear = std::none_of(
              cells_.begin() + static_cast<std::ptrdiff_t>(begin), cells_.end(),
              [&](const PlantedCell& o) {
                const double dx = o.cx - (ox + x);
                const double dy = o.cy - (oy + y);
                return std::hypot(dx, dy) < o.radius + r + 4.0;
              });
          if (clear) {
            cells_.push_back({cls, static_cast<double>(ox) + x, static_cast<double>(oy) + y, r});
            break;
          }
        }
      }
    }
    cell_ranges_[i] = {begin, cells_.size()};
  }
}

TileKind SyntheticSlide::kind(GridCoord c) const {
  if (!grid_.contains(c)) fail(ErrorCode::kOutOfGrid, "coord outside synthetic grid");
  return kinds_[static_cast<std::size_t>(c.row) * spec_.cols + c.col];
}

std::vector<PlantedCell> SyntheticSlide::cells_in(GridCoord c) const {
  if (!grid_.contains(c)) fail(ErrorCode::kOutOfGrid, "coord outside synthetic grid");
  const auto [b, e] = cell_ranges_[static_cast<std::size_t>(c.row) * spec_.cols + c.col];
  return {cells_.begin() + static_cast<std::ptrdiff_t>(b),
          cells_.begin() + static_cast<std::ptrdiff_t>(e)};
}

std::size_t SyntheticSlide::roi_tile_count() const noexcept {
  return static_cast<std::size_t>(std::count(kinds_.begin(), kinds_.end(), TileKind::kRoi));
}

AnnotationRecord SyntheticSlide::ground_truth(GridCoord c) const {
  AnnotationRecord rec;
  rec.tile.slide_id = spec_.slide_id;
  rec.tile.coord = c;
  rec.image_width = spec_.tile_px;
  rec.image_height = spec_.tile_px;
  const auto [ox, oy] = grid_.tile_origin(c);
  const double t = spec_.tile_px;
  for (const auto& cell : cells_in(c)) {
    const BBox raw = BBox::from_corners((cell.cx - cell.radius - ox) / t, (cell.cy - cell.radius - oy) / t,
                                        (cell.cx + cell.radius - ox) / t, (cell.cy + cell.radius - oy) / t);
    if (const auto clipped = clip_to_unit(raw)) rec.boxes.push_back({*clipped, cell.cls, BoxSource::kHuman, {}});
  }
  return rec;
}

RgbImage SyntheticSlide::render(std::int64_t x, std::int64_t y, int w, int h) const {
  RgbImage img(w, h, kBackground);
  for (int r = 0; r < spec_.rows; ++r) {
    for (int c = 0; c < spec_.cols; ++c) {
      const GridCoord coord{r, c};
      if (kind(coord) != TileKind::kOverstained) continue;
      const auto [ox, oy] = grid_.tile_origin(coord);
      img.fill_rect(static_cast<int>(ox + kOverstainInset - x),
                    static_cast<int>(oy + kOverstainInset - y),
                    static_cast<int>(ox + spec_.tile_px - kOverstainInset - x),
                    static_cast<int>(oy + spec_.tile_px - kOverstainInset - y), kOverstain);
    }
  }
  std::vector<PlantedCell> visible;
  for (const auto& cell : cells_) {
    if (cell.cx + cell.radius < x || cell.cx - cell.radius > x + w || cell.cy + cell.radius < y ||
        cell.cy - cell.radius > y + h) {
      continue;
    }
    visible.push_back(cell);
  }
  render_cells(img, visible, x, y);
  return img;
}

void SyntheticSlide::write_manifest(const std::filesystem::path& dir, int chunk_px) const {
  write_manifest_slide(dir, spec_.slide_id, spec_.width_px, spec_.height_px,
                       [this](std::int64_t x, std::int64_t y, int w, int h) {
                         return render(x, y, w, h);
                       },
                       chunk_px);
}

void SyntheticSlide::write_tiff(const std::filesystem::path& path, int tile_px) const {
  write_tiled_tiff(path, spec_.width_px, spec_.height_px,
                   [this](std::int64_t x, std::int64_t y, int w, int h) {
                     return render(x, y, w, h);
                   },
                   tile_px);
}

RgbImage render_tile(int tile_px, std::span<const PlantedCell> cells) {
  RgbImage img(tile_px, tile_px, kBackground);
  render_cells(img, cells);
  return img;
}

}  // namespace marrow::synthetic
