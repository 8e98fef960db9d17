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

#include "marrow/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <tuple>

#include "marrow/error.hpp"
#include "marrow/hashing.hpp"

namespace marrow {
namespace fs = std::filesystem;

namespace {

// Seeded Fisher-Yates with an explicit index rule so results do not depend
// on the standard library's shuffle.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(v[i - 1], v[j]);
  }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIoError, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) fail(ErrorCode::kIoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot replace " + path.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kNotFound, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json tile_to_json(const TileRef& t) {
  nlohmann::json j = {{"slide_id", t.slide_id}};
  if (t.coord) {
    j["row"] = t.coord->row;
    j["col"] = t.coord->col;
  }
  if (!t.file.empty()) j["file"] = t.file;
  return j;
}

TileRef tile_from_json(const nlohmann::json& j) {
  TileRef t;
  t.slide_id = j.value("slide_id", std::string{});
  if (j.contains("row") || j.contains("col")) {
    t.coord = GridCoord{j.at("row").get<int>(), j.at("col").get<int>()};
  }
  t.file = j.value("file", std::string{});
  return t;
}

bool same_content(const AnnotationRecord& a, const AnnotationRecord& b) {
  return a.image_width == b.image_width && a.image_height == b.image_height &&
         a.boxes == b.boxes;
}

void count_boxes(const AnnotationRecord& rec, ClassCounts& counts) {
  for (const auto& b : rec.boxes) ++counts[index_of(b.cls)];
}

}  // namespace

ClassCounts DatasetManifest::class_counts() const {
  ClassCounts counts{};
  for (const auto& rec : records) count_boxes(rec, counts);
  return counts;
}

const AnnotationRecord* DatasetManifest::find(const std::string& tile_key) const {
  for (const auto& rec : records) {
    if (rec.tile.key() == tile_key) return &rec;
  }
  return nullptr;
}

nlohmann::json to_json(const AnnotationRecord& rec) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : rec.boxes) {
    nlohmann::json jb = {{"class", class_name(b.cls)},
                         {"cx", b.bbox.cx},
                         {"cy", b.bbox.cy},
                         {"w", b.bbox.w},
                         {"h", b.bbox.h},
                         {"source", to_string(b.source)}};
    if (b.confidence) jb["confidence"] = *b.confidence;
    boxes.push_back(std::move(jb));
  }
  return {{"tile", tile_to_json(rec.tile)},
          {"key", rec.tile.key()},
          {"width", rec.image_width},
          {"height", rec.image_height},
          {"boxes", std::move(boxes)}};
}

AnnotationRecord annotation_record_from_json(const nlohmann::json& j) {
  try {
    AnnotationRecord rec;
    rec.tile = tile_from_json(j.at("tile"));
    rec.image_width = j.value("width", 512);
    rec.image_height = j.value("height", 512);
    for (const auto& jb : j.at("boxes")) {
      BoxAnnotation b;
      b.cls = class_from_name_or_throw(jb.at("class").get<std::string>());
      b.bbox = {jb.at("cx").get<double>(), jb.at("cy").get<double>(), jb.at("w").get<double>(),
                jb.at("h").get<double>()};
      const auto src = box_source_from_string(jb.value("source", std::string{"human"}));
      if (!src) fail(ErrorCode::kParseError, "unknown box source in record JSON");
      b.source = *src;
      if (jb.contains("confidence")) b.confidence = jb.at("confidence").get<double>();
      if (!is_valid(b.bbox)) fail(ErrorCode::kInvalidGeometry, "invalid box in record JSON");
      rec.boxes.push_back(b);
    }
    return rec;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, std::string("annotation record JSON: ") + e.what());
  }
}

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : m.records) records.push_back(to_json(r));
  nlohmann::json pending = nlohmann::json::array();
  for (const auto& t : m.pending) pending.push_back(tile_to_json(t));
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : m.provenance) {
    log.push_back({{"version", e.version},
                   {"timestamp", e.timestamp},
                   {"tiles", e.tiles},
                   {"class_deltas", e.class_deltas}});
  }
  return {{"version", m.version},
          {"class_counts", named_class_counts(m.class_counts())},
          {"records", std::move(records)},
          {"pending", std::move(pending)},
          {"provenance", std::move(log)}};
}

DatasetManifest dataset_manifest_from_json(const nlohmann::json& j) {
  try {
    DatasetManifest m;
    m.version = j.at("version").get<std::uint64_t>();
    for (const auto& r : j.at("records")) m.records.push_back(annotation_record_from_json(r));
    for (const auto& t : j.value("pending", nlohmann::json::array())) {
      m.pending.push_back(tile_from_json(t));
    }
    for (const auto& e : j.value("provenance", nlohmann::json::array())) {
      m.provenance.push_back({e.at("version").get<std::uint64_t>(),
                              e.at("timestamp").get<std::string>(),
                              e.at("tiles").get<std::vector<std::string>>(),
                              e.at("class_deltas").get<std::map<std::string, std::int64_t>>()});
    }
    if (j.contains("class_counts")) {
      // Classes left out of the stored counts read as zero.
      auto stored = j.at("class_counts").get<std::map<std::string, std::uint64_t>>();
      for (const auto& [name, n] : named_class_counts(m.class_counts())) {
        const auto it = stored.find(name);
        const std::uint64_t have = it == stored.end() ? 0 : it->second;
        if (it != stored.end()) stored.erase(it);
        if (have != n) fail(ErrorCode::kParseError, "manifest class_counts disagree with a recount of records");
      }
      if (!stored.empty()) {
        fail(ErrorCode::kParseError, "manifest class_counts names unknown class " + stored.begin()->first);
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, std::string("manifest JSON: ") + e.what());
  }
}

DatasetManifest load_manifest(const fs::path& path) {
  const std::string text = read_text(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  return dataset_manifest_from_json(j);
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  write_text_atomic(path, to_json(manifest).dump(2) + "\n");
}

// ---------------------------------------------------------------------------

std::string stratum_key(const AnnotationRecord& record, const ClassCounts& totals) {
  if (record.boxes.empty()) return "empty";
  CellClass best = record.boxes.front().cls;
  for (const auto& b : record.boxes) {
    const auto key = std::make_pair(totals[index_of(b.cls)], index_of(b.cls));
    if (key < std::make_pair(totals[index_of(best)], index_of(best))) best = b.cls;
  }
  return std::string(class_name(best));
}

SplitPlan stratified_split(const DatasetManifest& manifest, const SplitOptions& options) {
  if (options.folds < 2) fail(ErrorCode::kInvalidConfig, "need at least 2 folds");
  if (!(options.validation_share >= 0.0 && options.validation_share <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "validation share must be in [0,1]");
  }
  const auto folds = static_cast<std::size_t>(options.folds);
  const std::size_t n = manifest.records.size();
  if (n < folds) fail(ErrorCode::kInsufficientData, "fewer records than folds");

  SplitPlan plan;
  plan.folds = options.folds;
  plan.seed = options.seed;
  plan.fold_of.assign(n, 0);
  plan.held_out_role.assign(n, SplitRole::kValidation);
  plan.stratum_of.resize(n);

  const ClassCounts totals = manifest.class_counts();
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < n; ++i) {
    plan.stratum_of[i] = stratum_key(manifest.records[i], totals);
    strata[plan.stratum_of[i]].push_back(i);
  }

  std::vector<std::size_t> pooled;
  for (auto it = strata.begin(); it != strata.end();) {
    if (it->second.size() >= folds) {
      ++it;
      continue;
    }
    if (options.small_strata == SmallStratumPolicy::kThrow) {
      fail(ErrorCode::kInsufficientData,
           "stratum '" + it->first + "' has " + std::to_string(it->second.size()) +
               " records, fewer than " + std::to_string(folds) + " folds");
    }
    plan.warnings.push_back("stratum '" + it->first + "' has " +
                            std::to_string(it->second.size()) +
                            " records; pooled into 'rare'");
    for (std::size_t i : it->second) plan.stratum_of[i] = "rare";
    pooled.insert(pooled.end(), it->second.begin(), it->second.end());
    it = strata.erase(it);
  }
  if (!pooled.empty()) {
    std::sort(pooled.begin(), pooled.end());
    if (pooled.size() < folds) {
      plan.warnings.push_back("pooled 'rare' stratum still has fewer records than folds");
    }
    auto& rare = strata["rare"];
    rare.insert(rare.end(), pooled.begin(), pooled.end());
    std::sort(rare.begin(), rare.end());
  }

  std::size_t offset = 0;
  std::vector<std::vector<std::size_t>> held_out(folds);
  for (auto& [key, members] : strata) {
    seeded_shuffle(members, mix_seed(options.seed, fnv1a(key)));
    for (std::size_t j = 0; j < members.size(); ++j) {
      const std::size_t f = (offset + j) % folds;
      plan.fold_of[members[j]] = static_cast<int>(f);
      held_out[f].push_back(members[j]);
    }
    offset += members.size();
  }

  const auto per_mille = static_cast<std::uint64_t>(std::llround(options.validation_share * 1000));
  for (const auto& members : held_out) {
    for (std::size_t k = 0; k < members.size(); ++k) {
      const bool validation = (per_mille * (k + 1)) / 1000 > (per_mille * k) / 1000;
      plan.held_out_role[members[k]] = validation ? SplitRole::kValidation : SplitRole::kTest;
    }
  }
  return plan;
}

FoldView fold_view(const SplitPlan& plan, int fold) {
  if (fold < 0 || fold >= plan.folds) fail(ErrorCode::kInvalidConfig, "fold out of range");
  FoldView v;
  for (std::size_t i = 0; i < plan.fold_of.size(); ++i) {
    if (plan.fold_of[i] != fold) v.train.push_back(i);
    else if (plan.held_out_role[i] == SplitRole::kValidation) v.validation.push_back(i);
    else v.test.push_back(i);
  }
  return v;
}

nlohmann::json to_json(const SplitPlan& plan) {
  nlohmann::json roles = nlohmann::json::array();
  for (SplitRole r : plan.held_out_role) roles.push_back(r == SplitRole::kTest ? "test" : "validation");
  return {{"folds", plan.folds},
          {"seed", plan.seed},
          {"fold_of", plan.fold_of},
          {"held_out_role", std::move(roles)},
          {"stratum_of", plan.stratum_of},
          {"warnings", plan.warnings}};
}

// ---------------------------------------------------------------------------

std::uint64_t OversampleEntry::multiplicity(std::uint64_t unit) const {
  if (unit >= current) fail(ErrorCode::kOutOfBounds, "unit index outside stratum");
  return base + (std::binary_search(extra_units.begin(), extra_units.end(), unit) ? 1 : 0);
}

const OversampleEntry* OversamplePlan::find(const std::string& key) const {
  for (const auto& e : entries) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

OversamplePlan oversample_plan(const std::map<std::string, std::uint64_t>& counts,
                               const std::map<std::string, std::uint64_t>& targets,
                               std::uint64_t seed) {
  OversamplePlan plan;
  plan.seed = seed;
  for (const auto& [key, target] : targets) {
    const auto it = counts.find(key);
    if (it == counts.end()) fail(ErrorCode::kInvalidConfig, "target for unknown stratum '" + key + "'");
    const std::uint64_t current = it->second;
    if (target < current) {
      fail(ErrorCode::kInfeasibleTarget, "target " + std::to_string(target) + " for '" + key +
                                             "' is below the current " + std::to_string(current));
    }
    if (target == current) continue;
    if (current == 0) {
      fail(ErrorCode::kInfeasibleTarget, "stratum '" + key + "' has no units to replicate");
    }
    OversampleEntry e;
    e.key = key;
    e.current = current;
    e.target = target;
    e.base = target / current;
    const std::uint64_t extra = target % current;
    if (extra > 0) {
      // Partial Fisher-Yates over a sparse permutation picks `extra` units.
      std::mt19937_64 rng(mix_seed(seed, fnv1a(key)));
      std::map<std::uint64_t, std::uint64_t> swapped;
      auto value_at = [&](std::uint64_t i) {
        const auto s = swapped.find(i);
        return s == swapped.end() ? i : s->second;
      };
      for (std::uint64_t i = 0; i < extra; ++i) {
        const std::uint64_t j = i + rng() % (current - i);
        const std::uint64_t vi = value_at(i);
        const std::uint64_t vj = value_at(j);
        swapped[i] = vj;
        swapped[j] = vi;
        e.extra_units.push_back(vj);
      }
      std::sort(e.extra_units.begin(), e.extra_units.end());
    }
    plan.entries.push_back(std::move(e));
  }
  return plan;
}

std::map<std::string, std::uint64_t> targets_from_factor(
    const std::map<std::string, std::uint64_t>& counts, std::uint64_t factor) {
  if (factor == 0) fail(ErrorCode::kInfeasibleTarget, "oversampling factor must be >= 1");
  std::map<std::string, std::uint64_t> out;
  for (const auto& [key, n] : counts) out[key] = n * factor;
  return out;
}

std::map<std::string, std::uint64_t> named_class_counts(const ClassCounts& counts) {
  std::map<std::string, std::uint64_t> out;
  for (CellClass c : kAllClasses) out[std::string(class_name(c))] = counts[index_of(c)];
  return out;
}

nlohmann::json to_json(const OversamplePlan& plan) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : plan.entries) {
    entries.push_back({{"key", e.key},
                       {"current", e.current},
                       {"target", e.target},
                       {"base", e.base},
                       {"extra_units", e.extra_units},
                       {"planned_total", e.planned_total()}});
  }
  return {{"seed", plan.seed}, {"entries", std::move(entries)}};
}

// ---------------------------------------------------------------------------

std::vector<AnnotationRecord> query_rare_tiles(const DatasetManifest& manifest,
                                               std::span<const AnnotationRecord> pool,
                                               const QueryOptions& options) {
  if (pool.empty()) fail(ErrorCode::kEmptyPool, "candidate pool is empty");
  std::set<std::string> known;
  for (const auto& r : manifest.records) known.insert(r.tile.key());
  const ClassCounts totals = manifest.class_counts();

  using Priority = std::tuple<std::uint64_t, std::int64_t, std::uint64_t, std::string>;
  std::vector<std::pair<Priority, std::size_t>> ranked;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const std::string key = pool[i].tile.key();
    if (known.contains(key) || !seen.insert(key).second) continue;
    std::uint64_t rarest = std::numeric_limits<std::uint64_t>::max();
    std::int64_t rarest_boxes = 0;
    if (!pool[i].boxes.empty()) {
      const std::string cls = stratum_key(pool[i], totals);
      const CellClass c = class_from_name_or_throw(cls);
      rarest = totals[index_of(c)];
      rarest_boxes = std::count_if(pool[i].boxes.begin(), pool[i].boxes.end(),
                                   [&](const BoxAnnotation& b) { return b.cls == c; });
    }
    ranked.push_back({{rarest, -rarest_boxes, mix_seed(options.seed, fnv1a(key)), key}, i});
  }
  if (ranked.empty()) fail(ErrorCode::kEmptyPool, "no candidate tile outside the dataset");
  std::sort(ranked.begin(), ranked.end());
  std::vector<AnnotationRecord> out;
  for (std::size_t k = 0; k < std::min(options.batch, ranked.size()); ++k) {
    out.push_back(pool[ranked[k].second]);
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

DatasetManifest merge_confirmed(const DatasetManifest& manifest,
                                std::span<const AnnotationRecord> corrections,
                                const MergeOptions& options) {
  std::map<std::string, const AnnotationRecord*> batch;
  for (const auto& c : corrections) {
    const std::string key = c.tile.key();
    for (const auto& b : c.boxes) {
      if (b.source == BoxSource::kModel) {
        fail(ErrorCode::kUnconfirmedBox, "tile " + key + " has an unconfirmed model box");
      }
      if (!is_valid(b.bbox) || !is_inside_unit(b.bbox)) {
        fail(ErrorCode::kInvalidGeometry, "tile " + key + " has an invalid box");
      }
    }
    const auto [it, inserted] = batch.emplace(key, &c);
    if (!inserted && !same_content(*it->second, c)) {
      fail(ErrorCode::kConflictingDuplicate, "tile " + key + " corrected twice with different boxes");
    }
  }

  std::set<std::string> pending;
  for (const auto& t : manifest.pending) pending.insert(t.key());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) index[manifest.records[i].tile.key()] = i;

  DatasetManifest next = manifest;
  std::vector<std::string> changed;
  for (const auto& [key, rec] : batch) {
    if (const auto it = index.find(key); it != index.end()) {
      if (same_content(manifest.records[it->second], *rec)) continue;
      next.records[it->second] = *rec;
    } else if (pending.contains(key)) {
      next.records.push_back(*rec);
    } else {
      fail(ErrorCode::kUnknownTileRef, "tile " + key + " is neither in the dataset nor pending review");
    }
    changed.push_back(key);
  }
  if (changed.empty()) return manifest;

  std::stable_sort(next.records.begin(), next.records.end(),
                   [](const AnnotationRecord& a, const AnnotationRecord& b) {
                     return a.tile.key() < b.tile.key();
                   });
  std::erase_if(next.pending, [&](const TileRef& t) { return batch.contains(t.key()); });

  const ClassCounts before = manifest.class_counts();
  const ClassCounts after = next.class_counts();
  MergeLogEntry entry;
  entry.version = manifest.version + 1;
  entry.timestamp = options.clock ? options.clock() : utc_timestamp();
  entry.tiles = changed;
  for (CellClass c : kAllClasses) {
    const auto d = static_cast<std::int64_t>(after[index_of(c)]) -
                   static_cast<std::int64_t>(before[index_of(c)]);
    if (d != 0) entry.class_deltas[std::string(class_name(c))] = d;
  }
  next.version = entry.version;
  next.provenance.push_back(entry);
  if (options.on_merge) options.on_merge(entry);
  return next;
}

// ---------------------------------------------------------------------------

void write_pool_item(const fs::path& dir, const AnnotationRecord& predictions,
                     const RgbImage& image) {
  const std::string key = predictions.tile.key();
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  write_png(dir / "images" / (key + ".png"), image);
  write_text_atomic(dir / "labels" / (key + ".txt"), write_yolo(predictions.boxes));
}

std::vector<ReviewItem> read_pool(const fs::path& dir) {
  const fs::path labels = dir / "labels";
  if (!fs::is_directory(labels)) fail(ErrorCode::kNotFound, "no labels/ directory in " + dir.string());
  std::vector<ReviewItem> items;
  for (const auto& entry : fs::directory_iterator(labels)) {
    if (entry.path().extension() != ".txt") continue;
    ReviewItem item;
    item.predictions = read_annotation_file(entry.path());
    const std::string key = entry.path().stem().string();
    item.image = dir / "images" / (key + ".png");
    if (!fs::exists(item.image)) fail(ErrorCode::kNotFound, "missing tile image " + item.image.string());
    const auto [w, h] = png_dimensions(item.image);
    item.predictions.image_width = w;
    item.predictions.image_height = h;
    items.push_back(std::move(item));
  }
  std::sort(items.begin(), items.end(), [](const ReviewItem& a, const ReviewItem& b) {
    return a.predictions.tile.key() < b.predictions.tile.key();
  });
  return items;
}

std::vector<std::string> export_review_package(const fs::path& out_dir,
                                               std::span<const ReviewItem> items) {
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "labels");
  std::vector<std::string> keys;
  for (const auto& item : items) {
    const std::string key = item.predictions.tile.key();
    fs::copy_file(item.image, out_dir / "images" / (key + ".png"),
                  fs::copy_options::overwrite_existing);
    write_text_atomic(out_dir / "labels" / (key + ".txt"), write_yolo(item.predictions.boxes));
    keys.push_back(key);
  }
  write_text_atomic(out_dir / "queue.json", nlohmann::json{{"tiles", keys}}.dump(2) + "\n");
  return keys;
}

std::vector<std::string> read_queue(const fs::path& package_dir) {
  const std::string text = read_text(package_dir / "queue.json");
  try {
    return nlohmann::json::parse(text).at("tiles").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, "queue.json: " + std::string(e.what()));
  }
}

}  // namespace marrow
