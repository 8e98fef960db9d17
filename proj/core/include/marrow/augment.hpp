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

#ifndef MARROW_AUGMENT_HPP_
#define MARROW_AUGMENT_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "marrow/annotation.hpp"
#include "marrow/image.hpp"

namespace marrow {

/// A training tile and its boxes in normalized tile coordinates.
struct Sample {
  RgbImage image;
  std::vector<BoxAnnotation> boxes;
};

/// Axis-aligned pixel rectangle [x, x+w) x [y, y+h).
struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

// Box survival rule shared by crop, scale, cutmix and mosaic: a box survives
// iff its center lands inside the kept region; survivors are clipped to it.

Sample hflip(const Sample& s);
Sample vflip(const Sample& s);
/// Clockwise rotation by 90 * k degrees (k taken modulo 4).
Sample rotate90(const Sample& s, int k);
/// Keeps the pixel window `r`. Throws kInvalidGeometry when `r` leaves the
/// image and kDegenerateCrop when boxes existed but none survive.
Sample crop(const Sample& s, PixelRect r);
/// Zooms about the tile center by `factor` (> 0) keeping the canvas size;
/// uncovered area is filled with `pad`.
Sample scale(const Sample& s, double factor, Rgb pad = {128, 128, 128});

struct GeometricParams {
  double p_hflip = 0.5;
  double p_vflip = 0.5;
  bool rotate = true;            // uniform k in {0,1,2,3}
  double min_crop_fraction = 0.6;  // side fraction; 1 disables cropping
  double scale_min = 0.8;
  double scale_max = 1.2;
};

/// Random composition flip -> rotate -> crop (resized back) -> scale.
/// Propagates kDegenerateCrop so the caller can retry with another seed.
Sample augment_geometric(const Sample& s, const GeometricParams& params, std::uint64_t seed);

struct PhotometricValues {
  double hue_shift_deg = 0.0;
  double saturation_scale = 1.0;
  double brightness_delta = 0.0;  // added on the 0..255 scale
  double contrast_scale = 1.0;    // around mid-gray
  double noise_sigma = 0.0;
};

/// Boxes are returned unchanged.
Sample apply_photometric(const Sample& s, const PhotometricValues& v, std::uint64_t noise_seed);

struct PhotometricParams {
  double hue_max_deg = 10.0;
  double saturation_min = 0.7;
  double saturation_max = 1.3;
  double brightness_max = 20.0;
  double contrast_min = 0.8;
  double contrast_max = 1.2;
  double noise_sigma_max = 4.0;
};

Sample augment_photometric(const Sample& s, const PhotometricParams& params, std::uint64_t seed);

/// Pastes region `r` of b into a. Boxes of a whose centers fall in `r` are
/// dropped; others are trimmed when the region covers them across a full
/// axis. Boxes of b whose centers fall in `r` are kept, clipped to it.
/// Throws kDimensionMismatch for different tile sizes.
Sample cutmix_region(const Sample& a, const Sample& b, PixelRect r);
/// Seeded region with side fractions in [0.25, 0.75].
Sample cutmix(const Sample& a, const Sample& b, std::uint64_t seed);

/// 2x2 composition split at pixel (split_x, split_y). Each input is shrunk
/// by half and anchored at the split point toward its quadrant (top-left,
/// top-right, bottom-left, bottom-right); what overflows the quadrant is
/// cut off. Throws kDimensionMismatch for unequal sizes.
Sample mosaic_at(const std::array<Sample, 4>& inputs, int split_x, int split_y);
/// Seeded split point in the middle half of the tile.
Sample mosaic(const std::array<Sample, 4>& inputs, std::uint64_t seed);

}  // namespace marrow

#endif  // MARROW_AUGMENT_HPP_
