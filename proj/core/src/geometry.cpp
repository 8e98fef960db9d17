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

#include "marrow/geometry.hpp"

#include <algorithm>

namespace marrow {

bool is_valid(const BBox& b) noexcept {
  return b.cx >= 0.0 && b.cx <= 1.0 && b.cy >= 0.0 && b.cy <= 1.0 &&
         b.w > 0.0 && b.w <= 1.0 && b.h > 0.0 && b.h <= 1.0;
}

bool is_inside_unit(const BBox& b, double eps) noexcept {
  return is_valid(b) && b.left() >= -eps && b.top() >= -eps &&
         b.right() <= 1.0 + eps && b.bottom() <= 1.0 + eps;
}

std::optional<BBox> clip_to_unit(const BBox& b) noexcept {
  const double x0 = std::clamp(b.left(), 0.0, 1.0);
  const double y0 = std::clamp(b.top(), 0.0, 1.0);
  const double x1 = std::clamp(b.right(), 0.0, 1.0);
  const double y1 = std::clamp(b.bottom(), 0.0, 1.0);
  if (x1 - x0 <= 0.0 || y1 - y0 <= 0.0) return std::nullopt;
  return BBox::from_corners(x0, y0, x1, y1);
}

double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

namespace {

// Area from the same corner arithmetic as intersection_area, so identical
// boxes give IoU of exactly 1.
double corner_area(const BBox& b) noexcept {
  return (b.right() - b.left()) * (b.bottom() - b.top());
}

}  // namespace

double iou(const BBox& a, const BBox& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = corner_area(a) + corner_area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double diou(const BBox& a, const BBox& b) noexcept {
  const double dx = a.cx - b.cx;
  const double dy = a.cy - b.cy;
  const double cw = std::max(a.right(), b.right()) - std::min(a.left(), b.left());
  const double ch = std::max(a.bottom(), b.bottom()) - std::min(a.top(), b.top());
  const double diag2 = cw * cw + ch * ch;
  const double penalty = diag2 > 0.0 ? (dx * dx + dy * dy) / diag2 : 0.0;
  return iou(a, b) - penalty;
}

}  // namespace marrow
