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

#include "marrow/annotation.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "marrow/error.hpp"

namespace marrow {
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

[[noreturn]] void yolo_error(std::size_t line_no, const std::string& what) {
  fail(ErrorCode::kParseError, "yolo-txt line " + std::to_string(line_no) + ": " + what);
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kNotFound, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string_view to_string(BoxSource s) noexcept {
  switch (s) {
    case BoxSource::kHuman: return "human";
    case BoxSource::kModel: return "model";
    case BoxSource::kModelConfirmed: return "model-confirmed";
  }
  return "human";
}

std::optional<BoxSource> box_source_from_string(std::string_view s) noexcept {
  if (s == "human") return BoxSource::kHuman;
  if (s == "model") return BoxSource::kModel;
  if (s == "model-confirmed") return BoxSource::kModelConfirmed;
  return std::nullopt;
}

std::string TileRef::key() const {
  if (coord) {
    return slide_id + "__r" + std::to_string(coord->row) + "_c" + std::to_string(coord->col);
  }
  if (!file.empty()) return fs::path(file).stem().string();
  return slide_id;
}

TileRef tile_ref_from_key(std::string_view key) {
  TileRef ref;
  const auto sep = key.rfind("__r");
  if (sep != std::string_view::npos) {
    const auto rest = key.substr(sep + 3);
    const auto us = rest.find("_c");
    if (us != std::string_view::npos) {
      const auto row = parse_int(rest.substr(0, us));
      const auto col = parse_int(rest.substr(us + 2));
      if (row && col) {
        ref.slide_id = std::string(key.substr(0, sep));
        ref.coord = GridCoord{static_cast<int>(*row), static_cast<int>(*col)};
        return ref;
      }
    }
  }
  ref.file = std::string(key);
  return ref;
}

std::optional<AnnotationFormat> annotation_format_from_string(std::string_view s) noexcept {
  if (s == "yolo-txt" || s == "yolo") return AnnotationFormat::kYoloTxt;
  if (s == "voc-xml" || s == "voc") return AnnotationFormat::kVocXml;
  return std::nullopt;
}

std::vector<BoxAnnotation> parse_yolo(std::string_view text) {
  std::vector<BoxAnnotation> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

    const auto fields = split_ws(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    if (fields.size() != 5 && fields.size() != 6) {
      yolo_error(line_no, "expected 5 or 6 fields, got " + std::to_string(fields.size()));
    }
    const auto id = parse_int(fields[0]);
    if (!id) yolo_error(line_no, "class id is not an integer");
    const auto cls = class_from_id(*id);
    if (!cls) yolo_error(line_no, "class id " + std::to_string(*id) + " outside 0..18");
    std::array<double, 5> v{};
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto d = parse_double(fields[i]);
      if (!d) yolo_error(line_no, "field " + std::to_string(i + 1) + " is not a number");
      v[i - 1] = *d;
    }
    BoxAnnotation box;
    box.cls = *cls;
    box.bbox = {v[0], v[1], v[2], v[3]};
    if (!is_valid(box.bbox)) yolo_error(line_no, "box outside normalized range");
    if (fields.size() == 6) {
      if (v[4] < 0.0 || v[4] > 1.0) yolo_error(line_no, "confidence outside [0,1]");
      box.confidence = v[4];
      box.source = BoxSource::kModel;
    }
    out.push_back(box);
  }
  return out;
}

std::string write_yolo(std::span<const BoxAnnotation> boxes) {
  std::string out;
  for (const auto& b : boxes) {
    out += std::to_string(index_of(b.cls));
    for (double v : {b.bbox.cx, b.bbox.cy, b.bbox.w, b.bbox.h}) {
      out += ' ';
      out += format_double(v);
    }
    if (b.confidence) {
      out += ' ';
      out += format_double(*b.confidence);
    }
    out += '\n';
  }
  return out;
}

AnnotationRecord parse_voc(std::string_view xml) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    fail(ErrorCode::kParseError,
         "voc-xml line " + std::to_string(e.line()) + ": " + e.message());
  }
  std::string where = "annotation";
  try {
    const auto& root = tree.get_child("annotation");
    AnnotationRecord rec;
    where = "annotation/size";
    rec.image_width = root.get<int>("size.width");
    rec.image_height = root.get<int>("size.height");
    if (rec.image_width <= 0 || rec.image_height <= 0) {
      fail(ErrorCode::kParseError, "voc-xml element annotation/size: non-positive image size");
    }
    if (const auto tile = root.get_child_optional("tile")) {
      rec.tile.slide_id = tile->get<std::string>("slide_id", "");
      if (tile->get_child_optional("row")) {
        rec.tile.coord = GridCoord{tile->get<int>("row"), tile->get<int>("col")};
      }
    }
    rec.tile.file = root.get<std::string>("filename", "");
    if (rec.tile.coord) rec.tile.file.clear();
    std::size_t index = 0;
    for (const auto& [tag, obj] : root) {
      if (tag != "object") continue;
      where = "annotation/object[" + std::to_string(index++) + "]";
      BoxAnnotation box;
      box.cls = class_from_name_or_throw(obj.get<std::string>("name"));
      const double x0 = obj.get<double>("bndbox.xmin");
      const double y0 = obj.get<double>("bndbox.ymin");
      const double x1 = obj.get<double>("bndbox.xmax");
      const double y1 = obj.get<double>("bndbox.ymax");
      const double w = rec.image_width;
      const double h = rec.image_height;
      box.bbox = {(x0 + x1) / (2.0 * w), (y0 + y1) / (2.0 * h), (x1 - x0) / w, (y1 - y0) / h};
      if (!is_valid(box.bbox)) {
        fail(ErrorCode::kParseError, "voc-xml element " + where + ": invalid box corners");
      }
      if (const auto src = obj.get_optional<std::string>("source")) {
        const auto parsed = box_source_from_string(*src);
        if (!parsed) fail(ErrorCode::kParseError, "voc-xml element " + where + ": bad source");
        box.source = *parsed;
      }
      if (const auto conf = obj.get_optional<double>("confidence")) box.confidence = *conf;
      rec.boxes.push_back(box);
    }
    return rec;
  } catch (const pt::ptree_error& e) {
    fail(ErrorCode::kParseError, "voc-xml element " + where + ": " + e.what());
  }
}

std::string write_voc(const AnnotationRecord& rec) {
  std::ostringstream out;
  const double w = rec.image_width;
  const double h = rec.image_height;
  out << "<annotation>\n";
  out << "  <filename>"
      << xml_escape(rec.tile.file.empty() ? rec.tile.key() + ".png" : rec.tile.file)
      << "</filename>\n";
  if (rec.tile.coord || !rec.tile.slide_id.empty()) {
    out << "  <tile>\n    <slide_id>" << xml_escape(rec.tile.slide_id) << "</slide_id>\n";
    if (rec.tile.coord) {
      out << "    <row>" << rec.tile.coord->row << "</row>\n    <col>" << rec.tile.coord->col
          << "</col>\n";
    }
    out << "  </tile>\n";
  }
  out << "  <size>\n    <width>" << rec.image_width << "</width>\n    <height>"
      << rec.image_height << "</height>\n    <depth>3</depth>\n  </size>\n";
  out << "  <segmented>0</segmented>\n";
  for (const auto& b : rec.boxes) {
    out << "  <object>\n    <name>" << class_name(b.cls) << "</name>\n";
    out << "    <pose>Unspecified</pose>\n    <truncated>0</truncated>\n    <difficult>0</difficult>\n";
    out << "    <source>" << to_string(b.source) << "</source>\n";
    if (b.confidence) out << "    <confidence>" << format_double(*b.confidence) << "</confidence>\n";
    out << "    <bndbox>\n";
    out << "      <xmin>" << format_double(b.bbox.left() * w) << "</xmin>\n";
    out << "      <ymin>" << format_double(b.bbox.top() * h) << "</ymin>\n";
    out << "      <xmax>" << format_double(b.bbox.right() * w) << "</xmax>\n";
    out << "      <ymax>" << format_double(b.bbox.bottom() * h) << "</ymax>\n";
    out << "    </bndbox>\n  </object>\n";
  }
  out << "</annotation>\n";
  return out.str();
}

AnnotationRecord read_annotation_file(const fs::path& path) {
  const std::string text = slurp(path);
  if (path.extension() == ".xml") {
    AnnotationRecord rec = parse_voc(text);
    if (rec.tile.file.empty() && !rec.tile.coord) rec.tile = tile_ref_from_key(path.stem().string());
    return rec;
  }
  AnnotationRecord rec;
  rec.tile = tile_ref_from_key(path.stem().string());
  rec.boxes = parse_yolo(text);
  return rec;
}

void write_annotation_file(const fs::path& path, const AnnotationRecord& record,
                           AnnotationFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << (format == AnnotationFormat::kYoloTxt ? write_yolo(record.boxes) : write_voc(record));
}

std::vector<AnnotationRecord> read_annotation_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::kNotFound, "no such directory: " + dir.string());
  std::vector<AnnotationRecord> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (!entry.is_regular_file() || (ext != ".txt" && ext != ".xml")) continue;
    out.push_back(read_annotation_file(entry.path()));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.tile.key() < b.tile.key(); });
  return out;
}

}  // namespace marrow
