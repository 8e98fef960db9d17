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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "marrow/detection.hpp"
#include "marrow/error.hpp"
#include "marrow/geometry.hpp"
#include "marrow/synthetic.hpp"

namespace marrow {
namespace {

Detection det(BBox b, double conf, CellClass cls = CellClass::kBlast) {
  return {b, cls, conf, GridCoord{0, 0}, "s"};
}

TEST(Geometry, IouOfKnownOverlap) {
  const BBox a{0.25, 0.25, 0.5, 0.5};
  const BBox b{0.5, 0.25, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(iou(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, BBox{0.9, 0.9, 0.1, 0.1}), 0.0);
}

TEST(Geometry, TouchingBoxesDoNotOverlap) {
  EXPECT_EQ(iou(BBox{0.25, 0.5, 0.5, 0.5}, BBox{0.75, 0.5, 0.5, 0.5}), 0.0);
}

TEST(Geometry, DiouPenalizesCenterDistance) {
  const BBox a{0.2, 0.2, 0.2, 0.2};
  const BBox far{0.8, 0.8, 0.2, 0.2};
  EXPECT_LT(diou(a, far), 0.0);
  EXPECT_GT(diou(a, far), -1.0);
  EXPECT_DOUBLE_EQ(diou(a, a), 1.0);
  const BBox shifted{0.25, 0.2, 0.2, 0.2};
  EXPECT_LT(diou(a, shifted), iou(a, shifted));
}

TEST(Geometry, ClipToUnit) {
  const auto clipped = clip_to_unit(BBox{0.95, 0.5, 0.2, 0.2});
  ASSERT_TRUE(clipped.has_value());
  EXPECT_NEAR(clipped->right(), 1.0, 1e-15);
  EXPECT_NEAR(clipped->w, 0.15, 1e-15);
  EXPECT_FALSE(clip_to_unit(BBox{1.5, 0.5, 0.2, 0.2}).has_value());
}

TEST(Geometry, Validity) {
  EXPECT_TRUE(is_valid(BBox{0.5, 0.5, 1.0, 1.0}));
  EXPECT_FALSE(is_valid(BBox{0.5, 0.5, 0.0, 0.1}));
  EXPECT_FALSE(is_valid(BBox{-0.1, 0.5, 0.1, 0.1}));
}

TEST(Ranking, ConfidenceThenAreaThenCoordinates) {
  const Detection hi = det({0.5, 0.5, 0.2, 0.2}, 0.9);
  const Detection lo = det({0.5, 0.5, 0.1, 0.1}, 0.8);
  EXPECT_TRUE(ranks_before(hi, lo));
  const Detection small = det({0.5, 0.5, 0.1, 0.1}, 0.9);
  EXPECT_TRUE(ranks_before(small, hi));
  const Detection left = det({0.4, 0.5, 0.1, 0.1}, 0.9);
  EXPECT_TRUE(ranks_before(left, small));
  EXPECT_FALSE(ranks_before(small, small));
}

TEST(Nms, DropsLowConfidenceAndDuplicates) {
  const std::vector<Detection> raw = {
      det({0.5, 0.5, 0.2, 0.2}, 0.9),
      det({0.51, 0.5, 0.2, 0.2}, 0.7),   // duplicate
      det({0.2, 0.2, 0.1, 0.1}, 0.1),    // below threshold
      det({0.51, 0.5, 0.2, 0.2}, 0.6, CellClass::kNeutrophil),  // other class survives
  };
  const auto kept = diou_nms(raw);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0], raw[0]);
  EXPECT_EQ(kept[1], raw[3]);
}

TEST(Nms, ThresholdsAreInclusiveWhereDocumented) {
  NmsParams p;
  p.conf_thresh = 0.5;
  const std::vector<Detection> raw = {det({0.5, 0.5, 0.2, 0.2}, 0.5)};
  EXPECT_EQ(diou_nms(raw, p).size(), 1u);
}

TEST(Nms, OutputIsRankedAndIndependentOfInputOrder) {
  std::vector<Detection> raw;
  for (int i = 0; i < 12; ++i) {
    raw.push_back(det({0.05 + 0.08 * i, 0.5, 0.06, 0.06}, 0.3 + 0.05 * (i % 5)));
  }
  const auto a = diou_nms(raw);
  std::reverse(raw.begin(), raw.end());
  const auto b = diou_nms(raw);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), ranks_before));
}

TEST(Detect, SyntheticDetectorFindsPlantedCells) {
  const std::vector<synthetic::PlantedCell> cells = {
      {CellClass::kBlast, 100, 100, 10}, {CellClass::kErythroblast, 300, 200, 9}};
  Tile tile;
  tile.slide_id = "t";
  tile.pixels = synthetic::render_tile(512, cells);
  SyntheticDetector detector;
  const auto dets = diou_nms(detect_raw(detector, tile));
  ASSERT_EQ(dets.size(), 2u);
  std::vector<CellClass> classes = {dets[0].cls, dets[1].cls};
  std::sort(classes.begin(), classes.end());
  EXPECT_EQ(classes, (std::vector<CellClass>{CellClass::kBlast, CellClass::kErythroblast}));
}

TEST(Detect, DuplicatesFromTheDetectorAreSuppressed) {
  const std::vector<synthetic::PlantedCell> cells = {{CellClass::kMonocyte, 200, 200, 11}};
  Tile tile;
  tile.pixels = synthetic::render_tile(512, cells);
  SyntheticDetector detector({.emit_duplicates = true, .emit_low_confidence = true, .online = true});
  EXPECT_GT(detect_raw(detector, tile).size(), 1u);
  EXPECT_EQ(diou_nms(detect_raw(detector, tile)).size(), 1u);
}

TEST(Detect, OfflineDetectorReportsUnavailable) {
  SyntheticDetector detector({.emit_duplicates = false, .emit_low_confidence = false, .online = false});
  try {
    detector.check_available();
    FAIL() << "expected BackendUnavailable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBackendUnavailable);
  }
}

class BadBackend final : public DetectorBackend {
 public:
  explicit BadBackend(RawBox box) : box_(box) {}
  BackendInfo info() const override { return {"bad", "0", 0}; }
  std::vector<RawBox> detect(const Tile&) override { return {box_}; }

 private:
  RawBox box_;
};

TEST(Detect, RejectsUnknownClassIdsAndMalformedBoxes) {
  Tile tile;
  tile.pixels = RgbImage(4, 4);
  BadBackend unknown({{0.5, 0.5, 0.1, 0.1}, 42, 0.9});
  try {
    detect_raw(unknown, tile);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownClassId);
  }
  BadBackend score({{0.5, 0.5, 0.1, 0.1}, 1, 1.5});
  try {
    detect_raw(score, tile);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInferenceFailure);
  }
}

TEST(Detect, SamplingDetectorIsDeterministicPerTile) {
  SamplingDetector a(synthetic::reference_class_counts(), 10.0, 3);
  SamplingDetector b(synthetic::reference_class_counts(), 10.0, 3);
  Tile tile;
  tile.slide_id = "x";
  tile.coord = {2, 5};
  tile.pixels = RgbImage(1, 1);
  const auto da = detect_raw(a, tile);
  EXPECT_EQ(da, detect_raw(b, tile));
  EXPECT_EQ(diou_nms(da).size(), da.size());
}

TEST(Conversion, DetectionsRoundTripThroughAnnotations) {
  std::vector<Detection> dets = {det({0.5, 0.5, 0.2, 0.2}, 0.75), det({0.1, 0.1, 0.1, 0.1}, 0.5)};
  dets[1].tile_coord = {1, 1};
  const auto records = detections_to_annotations(dets);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].boxes[0].source, BoxSource::kModel);
  EXPECT_EQ(annotations_to_detections(records), dets);
}

}  // namespace
}  // namespace marrow
