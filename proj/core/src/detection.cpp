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

#include "marrow/detection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "marrow/error.hpp"
#include "marrow/hashing.hpp"
#include "marrow/synthetic.hpp"

namespace marrow {

std::vector<Detection> detect_raw(DetectorBackend& backend, const Tile& tile) {
  if (tile.pixels.empty()) fail(ErrorCode::kInferenceFailure, "tile has no raster");
  std::vector<Detection> out;
  for (const RawBox& raw : backend.detect(tile)) {
    const CellClass cls = class_from_id_or_throw(raw.class_id);
    if (!std::isfinite(raw.confidence) || raw.confidence < 0.0 || raw.confidence > 1.0) {
      fail(ErrorCode::kInferenceFailure, "detector confidence outside [0,1]");
    }
    if (!is_valid(raw.bbox)) fail(ErrorCode::kInferenceFailure, "detector emitted invalid box");
    out.push_back({raw.bbox, cls, raw.confidence, tile.coord, tile.slide_id});
  }
  return out;
}

bool ranks_before(const Detection& a, const Detection& b) noexcept {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  const double aa = a.bbox.area();
  const double ba = b.bbox.area();
  if (aa != ba) return aa < ba;
  if (a.bbox != b.bbox) return a.bbox < b.bbox;
  return a.cls < b.cls;
}

std::vector<Detection> diou_nms(std::span<const Detection> raw, NmsParams params) {
  std::vector<Detection> ranked;
  ranked.reserve(raw.size());
  for (const auto& d : raw) {
    if (d.confidence >= params.conf_thresh) ranked.push_back(d);
  }
  std::stable_sort(ranked.begin(), ranked.end(), ranks_before);

  std::array<std::vector<const Detection*>, kNumClasses> kept_by_class;
  std::vector<Detection> out;
  for (const auto& d : ranked) {
    auto& kept = kept_by_class[index_of(d.cls)];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection* k) {
      return diou(k->bbox, d.bbox) > params.nms_iou;
    });
    if (!suppressed) {
      kept.push_back(&d);
      out.push_back(d);
    }
  }
  return out;
}

std::vector<AnnotationRecord> detections_to_annotations(std::span<const Detection> dets,
                                                        int tile_px) {
  std::vector<AnnotationRecord> out;
  std::map<std::pair<std::string, GridCoord>, std::size_t> index;
  for (const auto& d : dets) {
    const auto key = std::make_pair(d.slide_id, d.tile_coord);
    auto it = index.find(key);
    if (it == index.end()) {
      AnnotationRecord rec;
      rec.tile.slide_id = d.slide_id;
      rec.tile.coord = d.tile_coord;
      rec.image_width = tile_px;
      rec.image_height = tile_px;
      it = index.emplace(key, out.size()).first;
      out.push_back(std::move(rec));
    }
    out[it->second].boxes.push_back({d.bbox, d.cls, BoxSource::kModel, d.confidence});
  }
  return out;
}

std::vector<Detection> annotations_to_detections(std::span<const AnnotationRecord> records) {
  std::vector<Detection> out;
  for (const auto& rec : records) {
    const GridCoord coord = rec.tile.coord.value_or(GridCoord{});
    for (const auto& box : rec.boxes) {
      out.push_back({box.bbox, box.cls, box.confidence.value_or(1.0), coord, rec.tile.slide_id});
    }
  }
  return out;
}

void SyntheticDetector::check_available() const {
  if (!options_.online) fail(ErrorCode::kBackendUnavailable, "synthetic detector is offline");
}

std::vector<RawBox> SyntheticDetector::detect(const Tile& tile) {
  check_available();
  const double w = tile.pixels.width();
  const double h = tile.pixels.height();
  std::vector<RawBox> out;
  for (const auto& obj : synthetic::find_objects(tile.pixels)) {
    const double bw = obj.x1 - obj.x0 + 1;
    const double bh = obj.y1 - obj.y0 + 1;
    const double r = std::max(bw, bh) / 2.0;
    const double fill = std::min(1.0, static_cast<double>(obj.area) / (std::numbers::pi * r * r));
    const double conf = std::round((0.5 + 0.5 * fill) * 1e6) / 1e6;
    const BBox box = BBox::from_corners(obj.x0 / w, obj.y0 / h, (obj.x1 + 1) / w, (obj.y1 + 1) / h);
    const auto id = static_cast<std::int64_t>(index_of(obj.cls));
    out.push_back({box, id, conf});
    if (options_.emit_duplicates) {
      const BBox shifted{std::min(1.0, box.cx + 1.0 / w), box.cy, box.w, box.h};
      out.push_back({shifted, id, std::round(conf * 0.8 * 1e6) / 1e6});
    }
    if (options_.emit_low_confidence) {
      out.push_back({box, (id + 1) % static_cast<std::int64_t>(kNumClasses), 0.1});
    }
  }
  return out;
}

SamplingDetector::SamplingDetector(std::array<double, kNumClasses> weights, double mean_objects,
                                   std::uint64_t seed)
    : weights_(weights), mean_objects_(mean_objects), seed_(seed) {
  synthetic::ClassSampler check(weights_, mean_objects_);
}

std::vector<RawBox> SamplingDetector::detect(const Tile& tile) {
  constexpr int kLattice = 8;
  synthetic::ClassSampler sampler(weights_, mean_objects_);
  const std::uint64_t key = fnv1a(tile.slide_id) ^
                            (static_cast<std::uint64_t>(tile.coord.row) << 32) ^
                            static_cast<std::uint64_t>(tile.coord.col);
  const auto labels = sampler.sample(seed_, key);
  std::vector<RawBox> out;
  const std::size_t n = std::min<std::size_t>(labels.size(), kLattice * kLattice);
  for (std::size_t i = 0; i < n; ++i) {
    const double cx = (static_cast<double>(i % kLattice) + 0.5) / kLattice;
    const double cy = (static_cast<double>(i / kLattice) + 0.5) / kLattice;
    out.push_back({{cx, cy, 0.08, 0.08}, static_cast<std::int64_t>(index_of(labels[i])), 0.9});
  }
  return out;
}

}  // namespace marrow
