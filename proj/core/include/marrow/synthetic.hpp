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

#ifndef MARROW_SYNTHETIC_HPP_
#define MARROW_SYNTHETIC_HPP_

// Deterministic synthetic slides and backends. Planted nuclei are drawn as
// discs in a reserved per-class palette so the synthetic backends can recover
// them from raster content alone; nothing is passed around out of band.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "marrow/annotation.hpp"
#include "marrow/cell_class.hpp"
#include "marrow/image.hpp"
#include "marrow/wsi_io.hpp"

namespace marrow::synthetic {

inline constexpr Rgb kBackground{236, 222, 228};
inline constexpr Rgb kOverstain{72, 24, 88};

/// Reserved nucleus color for a class. Colors are pairwise distinct and never
/// equal to the background or overstain colors.
Rgb nucleus_color(CellClass c) noexcept;

/// Inverse of nucleus_color; nullopt for any other color.
std::optional<CellClass> class_of_color(Rgb c) noexcept;

struct PlantedCell {
  CellClass cls = CellClass::kNeutrophil;
  double cx = 0.0;  // level-0 pixel coordinates
  double cy = 0.0;
  double radius = 8.0;
};

/// Draws the cells that intersect `image`, whose top-left sits at (ox, oy) in
/// level-0 coordinates.
void render_cells(RgbImage& image, std::span<const PlantedCell> cells, std::int64_t ox = 0,
                  std::int64_t oy = 0);

/// 4-connected component of nucleus-palette pixels sharing one color.
struct FoundObject {
  CellClass cls = CellClass::kNeutrophil;
  int x0 = 0;  // inclusive pixel bounds
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  std::int64_t area = 0;
};

/// Components ordered by (y0, x0, class).
std::vector<FoundObject> find_objects(const RgbImage& image, std::int64_t min_area = 4);

/// Fraction of pixels carrying the overstain color.
double overstain_fraction(const RgbImage& image) noexcept;

/// Annotated-object counts per class of the reference dataset, in CellClass
/// order. Used as the default class mixture for synthetic streams.
std::array<double, kNumClasses> reference_class_counts() noexcept;

/// Mean objects per ROI tile in the reference dataset (250,000 / 26,400).
inline constexpr double kReferenceObjectsPerTile = 250000.0 / 26400.0;

/// Seeded sampler of per-tile class labels: Poisson(mean) objects, classes
/// i.i.d. from a fixed mixture.
class ClassSampler {
 public:
  ClassSampler(std::array<double, kNumClasses> weights, double mean_objects);

  /// Labels for the tile identified by (seed, tile_key); the same pair always
  /// yields the same labels.
  std::vector<CellClass> sample(std::uint64_t seed, std::uint64_t tile_key) const;

  double mean_objects() const noexcept { return mean_objects_; }

 private:
  std::array<double, kNumClasses> cumulative_{};
  double mean_objects_;
};

enum class TileKind { kRoi, kBlank, kOverstained };

struct SlideSpec {
  std::string slide_id = "synthetic";
  std::int64_t width_px = 10240;
  std::int64_t height_px = 7680;
  int rows = 15;
  int cols = 20;
  int tile_px = 512;
  double roi_fraction = 0.15;
  double mean_objects = kReferenceObjectsPerTile;
  double radius_min = 7.0;
  double radius_max = 12.0;
  std::array<double, kNumClasses> class_weights = reference_class_counts();
  std::uint64_t seed = 1;
};

/// Fully determined synthetic slide: per-cell kind and the planted cells.
class SyntheticSlide {
 public:
  explicit SyntheticSlide(SlideSpec spec);

  const SlideSpec& spec() const noexcept { return spec_; }
  const TileGrid& grid() const noexcept { return grid_; }
  TileKind kind(GridCoord c) const;
  std::span<const PlantedCell> cells() const noexcept { return cells_; }
  /// Planted cells inside the tile window of `c`.
  std::vector<PlantedCell> cells_in(GridCoord c) const;
  std::size_t roi_tile_count() const noexcept;
  /// Circumscribed boxes of the planted cells in the tile of `c`, clipped to
  /// the tile, as a human-sourced annotation record.
  AnnotationRecord ground_truth(GridCoord c) const;

  RgbImage render(std::int64_t x, std::int64_t y, int w, int h) const;

  void write_manifest(const std::filesystem::path& dir, int chunk_px = 1024) const;
  void write_tiff(const std::filesystem::path& path, int tile_px = 256) const;

 private:
  SlideSpec spec_;
  TileGrid grid_;
  std::vector<TileKind> kinds_;
  std::vector<PlantedCell> cells_;
  std::vector<std::pair<std::size_t, std::size_t>> cell_ranges_;  // per grid cell
};

/// A blank tile of the given size with `cells` (tile-local pixels) drawn in.
RgbImage render_tile(int tile_px, std::span<const PlantedCell> cells);

}  // namespace marrow::synthetic

#endif  // MARROW_SYNTHETIC_HPP_
