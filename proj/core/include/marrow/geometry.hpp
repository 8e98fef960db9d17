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

#ifndef MARROW_GEOMETRY_HPP_
#define MARROW_GEOMETRY_HPP_

#include <compare>
#include <optional>

namespace marrow {

/// Axis-aligned box in normalized tile coordinates (center + size, [0,1]).
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const noexcept { return cx - w / 2.0; }
  double right() const noexcept { return cx + w / 2.0; }
  double top() const noexcept { return cy - h / 2.0; }
  double bottom() const noexcept { return cy + h / 2.0; }
  double area() const noexcept { return w * h; }

  static BBox from_corners(double x0, double y0, double x1, double y1) noexcept {
    return {(x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
  friend auto operator<=>(const BBox&, const BBox&) = default;
};

/// 0 <= cx,cy <= 1 and 0 < w,h <= 1.
bool is_valid(const BBox& b) noexcept;

/// True when the box lies entirely within the unit square.
bool is_inside_unit(const BBox& b, double eps = 1e-12) noexcept;

/// Intersection with the unit square; nullopt when nothing positive remains.
std::optional<BBox> clip_to_unit(const BBox& b) noexcept;

double intersection_area(const BBox& a, const BBox& b) noexcept;

/// Intersection over union, 0 for disjoint boxes.
double iou(const BBox& a, const BBox& b) noexcept;

/// Distance-IoU: IoU minus squared center distance over the squared diagonal
/// of the smallest enclosing box. Lies in (-1, 1].
double diou(const BBox& a, const BBox& b) noexcept;

}  // namespace marrow

#endif  // MARROW_GEOMETRY_HPP_
