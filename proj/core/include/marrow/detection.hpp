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

#ifndef MARROW_DETECTION_HPP_
#define MARROW_DETECTION_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "marrow/annotation.hpp"
#include "marrow/backend.hpp"
#include "marrow/cell_class.hpp"
#include "marrow/geometry.hpp"
#include "marrow/wsi_io.hpp"

namespace marrow {

struct Detection {
  BBox bbox;
  CellClass cls = CellClass::kNeutrophil;
  double confidence = 0.0;
  GridCoord tile_coord;
  std::string slide_id;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// A backend's unvalidated output; class ids are checked by detect_raw.
struct RawBox {
  BBox bbox;
  std::int64_t class_id = 0;
  double confidence = 0.0;
};

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;

  virtual BackendInfo info() const = 0;
  virtual void check_available() const {}
  /// Pre-NMS boxes for one tile.
  virtual std::vector<RawBox> detect(const Tile& tile) = 0;
};

/// Runs the backend and validates its output. Throws kUnknownClassId for ids
/// outside the taxonomy and kInferenceFailure for malformed boxes or scores.
std::vector<Detection> detect_raw(DetectorBackend& backend, const Tile& tile);

/// Deterministic ranking: confidence descending, then smaller area, then
/// lexicographic (cx, cy, w, h), then class id.
bool ranks_before(const Detection& a, const Detection& b) noexcept;

struct NmsParams {
  double conf_thresh = 0.25;
  double nms_iou = 0.45;
};

/// Confidence filter followed by per-class greedy DIoU-NMS: a box is dropped
/// when its DIoU with an already kept same-class box exceeds nms_iou. Output
/// is sorted by ranks_before.
std::vector<Detection> diou_nms(std::span<const Detection> raw, NmsParams params = {});

/// Groups detections by tile into annotation records (one record per tile,
/// first-seen order); boxes carry source=model and the confidence.
std::vector<AnnotationRecord> detections_to_annotations(std::span<const Detection> dets,
                                                        int tile_px = 512);

/// Inverse of detections_to_annotations. Boxes without a confidence map to
/// confidence 1.
std::vector<Detection> annotations_to_detections(std::span<const AnnotationRecord> records);

/// Recovers planted nuclei from synthetic rasters: one box per palette
/// component, confidence from the component's fill of its bounding disc.
/// Optionally adds a jittered lower-confidence duplicate per object and a
/// low-confidence spurious box, both of which NMS must remove.
class SyntheticDetector final : public DetectorBackend {
 public:
  struct Options {
    bool emit_duplicates = false;
    bool emit_low_confidence = false;
    bool online = true;
  };

  SyntheticDetector() : SyntheticDetector(Options{}) {}
  explicit SyntheticDetector(Options options) : options_(options) {}

  BackendInfo info() const override { return {"synthetic-detector", "1", 0}; }
  void check_available() const override;
  std::vector<RawBox> detect(const Tile& tile) override;

 private:
  Options options_;
};

/// Ignores raster content and samples labels i.i.d. from a fixed class
/// mixture, seeded by (seed, slide, coord). Boxes sit on a non-overlapping
/// lattice so NMS keeps all of them.
class SamplingDetector final : public DetectorBackend {
 public:
  SamplingDetector(std::array<double, kNumClasses> weights, double mean_objects,
                   std::uint64_t seed);

  BackendInfo info() const override { return {"sampling-detector", "1", 0}; }
  std::vector<RawBox> detect(const Tile& tile) override;

 private:
  std::array<double, kNumClasses> weights_;
  double mean_objects_;
  std::uint64_t seed_;
};

}  // namespace marrow

#endif  // MARROW_DETECTION_HPP_
