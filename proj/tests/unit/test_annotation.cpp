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

#include "fixtures.hpp"
#include "marrow/annotation.hpp"
#include "marrow/error.hpp"

namespace marrow {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no marrow::Error thrown";
  return ErrorCode::kIoError;
}

TEST(Yolo, ParsesBoxesAndConfidence) {
  const auto boxes = parse_yolo("# header\n4 0.5 0.5 0.1 0.2\n\n5 0.25 0.75 0.05 0.05 0.875\n");
  ASSERT_EQ(boxes.size(), 2u);
  EXPECT_EQ(boxes[0].cls, CellClass::kBlast);
  EXPECT_EQ(boxes[0].source, BoxSource::kHuman);
  EXPECT_FALSE(boxes[0].confidence.has_value());
  EXPECT_EQ(boxes[1].cls, CellClass::kErythroblast);
  EXPECT_EQ(boxes[1].source, BoxSource::kModel);
  EXPECT_EQ(boxes[1].confidence, 0.875);
}

TEST(Yolo, RejectsMalformedLines) {
  EXPECT_EQ(code_of([] { parse_yolo("4 0.5 0.5 0.1\n"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_yolo("4 0.5 0.5 0.1 zero\n"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_yolo("4 0.5 0.5 0.1 0.1 1.5\n"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_yolo("77 0.5 0.5 0.1 0.1\n"); }), ErrorCode::kParseError);
}

TEST(Yolo, WriterUsesShortestRoundTripDecimals) {
  const std::vector<BoxAnnotation> boxes = {
      {{0.1, 0.2, 0.3, 0.05}, CellClass::kNeutrophil, BoxSource::kHuman, std::nullopt}};
  EXPECT_EQ(write_yolo(boxes), "0 0.1 0.2 0.3 0.05\n");
}

TEST(Voc, RoundTripsProvenanceAndTileRef) {
  AnnotationRecord rec;
  rec.tile.slide_id = "case7";
  rec.tile.coord = GridCoord{3, 11};
  rec.image_width = 256;
  rec.image_height = 512;
  rec.boxes.push_back({{0.5, 0.5, 0.25, 0.125}, CellClass::kPlasmaCell, BoxSource::kModelConfirmed, std::nullopt});
  rec.boxes.push_back({{0.25, 0.25, 0.125, 0.125}, CellClass::kDebris, BoxSource::kModel, 0.5});
  const std::string xml = write_voc(rec);
  EXPECT_NE(xml.find("<source>model-confirmed</source>"), std::string::npos);
  EXPECT_EQ(parse_voc(xml), rec);
}

TEST(Voc, MalformedXmlIsAParseError) {
  EXPECT_EQ(code_of([] { parse_voc("<annotation><object>"); }), ErrorCode::kParseError);
}

TEST(Voc, RandomLatticeRecordsRoundTrip) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const AnnotationRecord rec = testing::random_record(seed, true);
    EXPECT_EQ(parse_voc(write_voc(rec)), rec) << "seed " << seed;
  }
}

TEST(TileRefKey, SlideAndFileForms) {
  TileRef slide{"abc", GridCoord{2, 9}, ""};
  EXPECT_EQ(slide.key(), "abc__r2_c9");
  EXPECT_EQ(tile_ref_from_key("abc__r2_c9"), slide);
  const TileRef file = tile_ref_from_key("image_0042");
  EXPECT_FALSE(file.coord.has_value());
  EXPECT_EQ(file.key(), "image_0042");
}

TEST(Files, DirectoryReadIsSortedByKey) {
  testing::TempDir dir("marrow-annot");
  AnnotationRecord a;
  a.tile = {"s", GridCoord{1, 0}, ""};
  a.boxes.push_back({{0.5, 0.5, 0.1, 0.1}, CellClass::kBlast, BoxSource::kHuman, std::nullopt});
  AnnotationRecord b = a;
  b.tile.coord = GridCoord{0, 5};
  write_annotation_file(dir / "s__r1_c0.txt", a, AnnotationFormat::kYoloTxt);
  write_annotation_file(dir / "s__r0_c5.xml", b, AnnotationFormat::kVocXml);
  const auto records = read_annotation_dir(dir.path());
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].tile.key(), "s__r0_c5");
  EXPECT_EQ(records[1].tile.key(), "s__r1_c0");
  EXPECT_EQ(records[1].boxes, a.boxes);
}

TEST(Files, MissingFileIsNotFound) {
  EXPECT_EQ(code_of([] { read_annotation_file("/nonexistent/x.txt"); }), ErrorCode::kNotFound);
}

}  // namespace
}  // namespace marrow
