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

#ifndef MARROW_ANNOTATION_HPP_
#define MARROW_ANNOTATION_HPP_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "marrow/cell_class.hpp"
#include "marrow/geometry.hpp"
#include "marrow/wsi_io.hpp"

namespace marrow {

enum class BoxSource { kHuman, kModel, kModelConfirmed };

std::string_view to_string(BoxSource s) noexcept;
std::optional<BoxSource> box_source_from_string(std::string_view s) noexcept;

struct BoxAnnotation {
  BBox bbox;
  CellClass cls = CellClass::kNeutrophil;
  BoxSource source = BoxSource::kHuman;
  std::optional<double> confidence;

  friend bool operator==(const BoxAnnotation&, const BoxAnnotation&) = default;
};

/// Identifies an annotated tile either by slide + grid coordinate or by a
/// standalone image file.
struct TileRef {
  std::string slide_id;
  std::optional<GridCoord> coord;
  std::string file;

  /// Stable key used for manifests, review queues and file stems:
  /// "<slide>__r<row>_c<col>" for slide tiles, the file stem otherwise.
  std::string key() const;

  friend bool operator==(const TileRef&, const TileRef&) = default;
};

/// Inverse of TileRef::key for slide-tile keys; other stems become file refs.
TileRef tile_ref_from_key(std::string_view key);

struct AnnotationRecord {
  TileRef tile;
  int image_width = 512;
  int image_height = 512;
  std::vector<BoxAnnotation> boxes;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

enum class AnnotationFormat { kYoloTxt, kVocXml };

std::optional<AnnotationFormat> annotation_format_from_string(std::string_view s) noexcept;

/// "class_id cx cy w h [confidence]" per line, normalized coordinates. A
/// confidence column marks the box as model output. Blank lines and '#'
/// comments are skipped. Throws kParseError naming the line.
std::vector<BoxAnnotation> parse_yolo(std::string_view text);
std::string write_yolo(std::span<const BoxAnnotation> boxes);

/// Pascal-VOC XML with absolute pixel corners. Per-object <source> and
/// <confidence> elements carry review provenance.
AnnotationRecord parse_voc(std::string_view xml);
std::string write_voc(const AnnotationRecord& record);

/// File-level helpers; yolo-txt records take their TileRef from the stem.
AnnotationRecord read_annotation_file(const std::filesystem::path& path);
void write_annotation_file(const std::filesystem::path& path, const AnnotationRecord& record,
                           AnnotationFormat format);

/// Every *.txt and *.xml annotation in `dir`, sorted by tile key.
std::vector<AnnotationRecord> read_annotation_dir(const std::filesystem::path& dir);

}  // namespace marrow

#endif  // MARROW_ANNOTATION_HPP_
