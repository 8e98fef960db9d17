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

#include "marrow/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "marrow/error.hpp"
#include "marrow/hashing.hpp"

namespace marrow {
namespace {

struct Region {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;

  bool contains(double x, double y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

// Per-axis affine map x' = s*x + t applied to a box, followed by the
// center-survival rule and clipping against `keep`.
std::optional<BBox> place(const BBox& b, double sx, double tx, double sy, double ty,
                          const Region& keep) {
  BBox out{sx * b.cx + tx, sy * b.cy + ty, sx * b.w, sy * b.h};
  if (!keep.contains(out.cx, out.cy)) return std::nullopt;
  if (out.left() < keep.x0 || out.right() > keep.x1 || out.top() < keep.y0 ||
      out.bottom() > keep.y1) {
    out = BBox::from_corners(std::max(out.left(), keep.x0), std::max(out.top(), keep.y0),
                             std::min(out.right(), keep.x1), std::min(out.bottom(), keep.y1));
  }
  if (!(out.w > 0.0) || !(out.h > 0.0)) return std::nullopt;
  return out;
}

void place_all(const std::vector<BoxAnnotation>& in, double sx, double tx, double sy, double ty,
               const Region& keep, std::vector<BoxAnnotation>& out) {
  for (const auto& b : in) {
    if (auto placed = place(b.bbox, sx, tx, sy, ty, keep)) {
      BoxAnnotation copy = b;
      copy.bbox = *placed;
      out.push_back(copy);
    }
  }
}

Region normalized(PixelRect r, int w, int h) {
  return {static_cast<double>(r.x) / w, static_cast<double>(r.y) / h,
          static_cast<double>(r.x + r.w) / w, static_cast<double>(r.y + r.h) / h};
}

void require_inside(const RgbImage& img, PixelRect r) {
  if (r.w < 0 || r.h < 0 || r.x < 0 || r.y < 0 || r.x + r.w > img.width() ||
      r.y + r.h > img.height()) {
    fail(ErrorCode::kInvalidGeometry, "rectangle leaves the tile");
  }
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d == 0.0) h = 0.0;
  else if (mx == r) h = 60.0 * std::fmod((g - b) / d + 6.0, 6.0);
  else if (mx == g) h = 60.0 * ((b - r) / d + 2.0);
  else h = 60.0 * ((r - g) / d + 4.0);
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

}  // namespace

Sample hflip(const Sample& s) {
  const RgbImage& in = s.image;
  Sample out{RgbImage(in.width(), in.height()), {}};
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) out.image.set(in.width() - 1 - x, y, in.at(x, y));
  }
  for (auto b : s.boxes) {
    b.bbox.cx = 1.0 - b.bbox.cx;
    out.boxes.push_back(b);
  }
  return out;
}

Sample vflip(const Sample& s) {
  const RgbImage& in = s.image;
  Sample out{RgbImage(in.width(), in.height()), {}};
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) out.image.set(x, in.height() - 1 - y, in.at(x, y));
  }
  for (auto b : s.boxes) {
    b.bbox.cy = 1.0 - b.bbox.cy;
    out.boxes.push_back(b);
  }
  return out;
}

Sample rotate90(const Sample& s, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return s;
  const RgbImage& in = s.image;
  const int w = in.width();
  const int h = in.height();
  Sample out;
  out.image = k == 2 ? RgbImage(w, h) : RgbImage(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      switch (k) {
        case 1: out.image.set(h - 1 - y, x, in.at(x, y)); break;
        case 2: out.image.set(w - 1 - x, h - 1 - y, in.at(x, y)); break;
        default: out.image.set(y, w - 1 - x, in.at(x, y)); break;
      }
    }
  }
  for (auto b : s.boxes) {
    const BBox o = b.bbox;
    switch (k) {
      case 1: b.bbox = {1.0 - o.cy, o.cx, o.h, o.w}; break;
      case 2: b.bbox = {1.0 - o.cx, 1.0 - o.cy, o.w, o.h}; break;
      default: b.bbox = {o.cy, 1.0 - o.cx, o.h, o.w}; break;
    }
    out.boxes.push_back(b);
  }
  return out;
}

Sample crop(const Sample& s, PixelRect r) {
  require_inside(s.image, r);
  if (r.w == 0 || r.h == 0) fail(ErrorCode::kInvalidGeometry, "empty crop window");
  const double w = s.image.width();
  const double h = s.image.height();
  Sample out{s.image.crop(r.x, r.y, r.w, r.h), {}};
  place_all(s.boxes, w / r.w, -r.x / static_cast<double>(r.w), h / r.h,
            -r.y / static_cast<double>(r.h), Region{}, out.boxes);
  if (!s.boxes.empty() && out.boxes.empty()) {
    fail(ErrorCode::kDegenerateCrop, "crop removed every box");
  }
  return out;
}

Sample scale(const Sample& s, double factor, Rgb pad) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    fail(ErrorCode::kInvalidGeometry, "scale factor must be positive");
  }
  const int w = s.image.width();
  const int h = s.image.height();
  const int sw = std::max(1, static_cast<int>(std::lround(w * factor)));
  const int sh = std::max(1, static_cast<int>(std::lround(h * factor)));
  const int ox = (w - sw) / 2;
  const int oy = (h - sh) / 2;
  Sample out{RgbImage(w, h, pad), {}};
  out.image.paste(s.image.resized(sw, sh), ox, oy);
  place_all(s.boxes, static_cast<double>(sw) / w, static_cast<double>(ox) / w,
            static_cast<double>(sh) / h, static_cast<double>(oy) / h, Region{}, out.boxes);
  return out;
}

Sample augment_geometric(const Sample& s, const GeometricParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x6e0));
  Sample cur = s;
  if (uniform(rng, 0, 1) < p.p_hflip) cur = hflip(cur);
  if (uniform(rng, 0, 1) < p.p_vflip) cur = vflip(cur);
  if (p.rotate) cur = rotate90(cur, static_cast<int>(rng() % 4));
  if (p.min_crop_fraction < 1.0) {
    const int w = cur.image.width();
    const int h = cur.image.height();
    const double f = uniform(rng, std::max(p.min_crop_fraction, 0.05), 1.0);
    const int cw = std::max(1, static_cast<int>(std::lround(w * f)));
    const int ch = std::max(1, static_cast<int>(std::lround(h * f)));
    const int x = static_cast<int>(rng() % static_cast<std::uint64_t>(w - cw + 1));
    const int y = static_cast<int>(rng() % static_cast<std::uint64_t>(h - ch + 1));
    cur = crop(cur, {x, y, cw, ch});
    cur.image = cur.image.resized(w, h);
  }
  if (p.scale_min != 1.0 || p.scale_max != 1.0) {
    cur = scale(cur, uniform(rng, p.scale_min, p.scale_max));
  }
  return cur;
}

Sample apply_photometric(const Sample& s, const PhotometricValues& v, std::uint64_t noise_seed) {
  Sample out{s.image, s.boxes};
  std::mt19937_64 rng(mix_seed(noise_seed, 0xc010));
  std::normal_distribution<double> noise(0.0, std::max(v.noise_sigma, 1e-300));
  const bool add_noise = v.noise_sigma > 0.0;
  for (int y = 0; y < out.image.height(); ++y) {
    for (int x = 0; x < out.image.width(); ++x) {
      const Rgb px = out.image.at(x, y);
      double h = 0, sat = 0, val = 0;
      rgb_to_hsv(px.r / 255.0, px.g / 255.0, px.b / 255.0, h, sat, val);
      h = std::fmod(h + v.hue_shift_deg + 360.0, 360.0);
      sat = std::clamp(sat * v.saturation_scale, 0.0, 1.0);
      double r = 0, g = 0, b = 0;
      hsv_to_rgb(h, sat, val, r, g, b);
      std::array<double, 3> ch{r * 255.0, g * 255.0, b * 255.0};
      for (double& c : ch) {
        c = (c - 128.0) * v.contrast_scale + 128.0 + v.brightness_delta;
        if (add_noise) c += noise(rng);
      }
      out.image.set(x, y, {to_byte(ch[0]), to_byte(ch[1]), to_byte(ch[2])});
    }
  }
  return out;
}

Sample augment_photometric(const Sample& s, const PhotometricParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0xf07));
  PhotometricValues v;
  v.hue_shift_deg = uniform(rng, -p.hue_max_deg, p.hue_max_deg);
  v.saturation_scale = uniform(rng, p.saturation_min, p.saturation_max);
  v.brightness_delta = uniform(rng, -p.brightness_max, p.brightness_max);
  v.contrast_scale = uniform(rng, p.contrast_min, p.contrast_max);
  v.noise_sigma = uniform(rng, 0.0, p.noise_sigma_max);
  return apply_photometric(s, v, rng());
}

Sample cutmix_region(const Sample& a, const Sample& b, PixelRect r) {
  if (a.image.width() != b.image.width() || a.image.height() != b.image.height()) {
    fail(ErrorCode::kDimensionMismatch, "cutmix inputs differ in size");
  }
  require_inside(a.image, r);
  if (r.w == 0 || r.h == 0) return a;
  const Region reg = normalized(r, a.image.width(), a.image.height());
  Sample out{a.image, {}};
  out.image.paste(b.image.crop(r.x, r.y, r.w, r.h), r.x, r.y);

  for (const auto& box : a.boxes) {
    const BBox& o = box.bbox;
    if (reg.contains(o.cx, o.cy)) continue;
    BBox kept = o;
    const bool overlaps = reg.x0 < o.right() && reg.x1 > o.left() && reg.y0 < o.bottom() &&
                          reg.y1 > o.top();
    if (overlaps && reg.y0 <= o.top() && reg.y1 >= o.bottom()) {
      kept = o.cx < reg.x0 ? BBox::from_corners(o.left(), o.top(), reg.x0, o.bottom())
                           : BBox::from_corners(reg.x1, o.top(), o.right(), o.bottom());
    } else if (overlaps && reg.x0 <= o.left() && reg.x1 >= o.right()) {
      kept = o.cy < reg.y0 ? BBox::from_corners(o.left(), o.top(), o.right(), reg.y0)
                           : BBox::from_corners(o.left(), reg.y1, o.right(), o.bottom());
    }
    if (!(kept.w > 0.0) || !(kept.h > 0.0)) continue;
    BoxAnnotation copy = box;
    copy.bbox = kept;
    out.boxes.push_back(copy);
  }
  place_all(b.boxes, 1.0, 0.0, 1.0, 0.0, reg, out.boxes);
  return out;
}

Sample cutmix(const Sample& a, const Sample& b, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0xc07));
  const int w = a.image.width();
  const int h = a.image.height();
  const int rw = static_cast<int>(std::lround(w * uniform(rng, 0.25, 0.75)));
  const int rh = static_cast<int>(std::lround(h * uniform(rng, 0.25, 0.75)));
  const int x = static_cast<int>(rng() % static_cast<std::uint64_t>(w - rw + 1));
  const int y = static_cast<int>(rng() % static_cast<std::uint64_t>(h - rh + 1));
  return cutmix_region(a, b, {x, y, rw, rh});
}

Sample mosaic_at(const std::array<Sample, 4>& inputs, int split_x, int split_y) {
  const int w = inputs[0].image.width();
  const int h = inputs[0].image.height();
  for (const auto& s : inputs) {
    if (s.image.width() != w || s.image.height() != h) {
      fail(ErrorCode::kDimensionMismatch, "mosaic inputs differ in size");
    }
  }
  if (w < 2 || h < 2 || split_x < 0 || split_x > w || split_y < 0 || split_y > h) {
    fail(ErrorCode::kInvalidGeometry, "mosaic split point outside the tile");
  }
  const int hw = w / 2;
  const int hh = h / 2;
  Sample out{RgbImage(w, h, {128, 128, 128}), {}};
  for (int q = 0; q < 4; ++q) {
    const bool right = q % 2 == 1;
    const bool bottom = q >= 2;
    const PixelRect quad{right ? split_x : 0, bottom ? split_y : 0,
                         right ? w - split_x : split_x, bottom ? h - split_y : split_y};
    if (quad.w == 0 || quad.h == 0) continue;
    const int ox = right ? split_x : split_x - hw;
    const int oy = bottom ? split_y : split_y - hh;
    const RgbImage half = inputs[q].image.resized(hw, hh);
    // Part of the shrunken image that lands inside the quadrant.
    const int x0 = std::max(quad.x, ox);
    const int y0 = std::max(quad.y, oy);
    const int x1 = std::min(quad.x + quad.w, ox + hw);
    const int y1 = std::min(quad.y + quad.h, oy + hh);
    if (x1 > x0 && y1 > y0) out.image.paste(half.crop(x0 - ox, y0 - oy, x1 - x0, y1 - y0), x0, y0);
    place_all(inputs[q].boxes, static_cast<double>(hw) / w, static_cast<double>(ox) / w,
              static_cast<double>(hh) / h, static_cast<double>(oy) / h, normalized(quad, w, h),
              out.boxes);
  }
  return out;
}

Sample mosaic(const std::array<Sample, 4>& inputs, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x3a1c));
  const int w = inputs[0].image.width();
  const int h = inputs[0].image.height();
  const int sx = w / 4 + static_cast<int>(rng() % static_cast<std::uint64_t>(w / 2 + 1));
  const int sy = h / 4 + static_cast<int>(rng() % static_cast<std::uint64_t>(h / 2 + 1));
  return mosaic_at(inputs, sx, sy);
}

}  // namespace marrow
