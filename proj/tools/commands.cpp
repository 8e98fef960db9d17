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

#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "marrow/augment.hpp"
#include "marrow/dataset.hpp"
#include "marrow/detection.hpp"
#include "marrow/error.hpp"
#include "marrow/eval_metrics.hpp"
#include "marrow/hashing.hpp"
#include "marrow/image.hpp"
#include "marrow/pipeline.hpp"
#include "marrow/review_service.hpp"
#include "marrow/roi_gate.hpp"
#include "marrow/synthetic.hpp"
#include "marrow/wire.hpp"

namespace marrow::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIoError, "write failed: " + path.string());
}

/// Writes to `path`, or stdout when it is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
  } else {
    write_text(path, text);
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

Json metrics_json(const BinaryMetrics& m) {
  const auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return {{"accuracy", opt(m.accuracy)},
          {"precision", opt(m.precision)},
          {"recall", opt(m.recall)},
          {"specificity", opt(m.specificity)},
          {"npv", opt(m.npv)}};
}

Json roc_json(const RocCurve& c) {
  Json pts = Json::array();
  for (const auto& p : c.points) pts.push_back({p.fpr, p.tpr});
  return {{"auc", c.auc}, {"points", pts}};
}

bool parse_label(const std::string& raw, std::size_t line) {
  const std::string v = trim(raw);
  if (v == "1" || v == "true" || v == "positive") return true;
  if (v == "0" || v == "false" || v == "negative") return false;
  fail(ErrorCode::kParseError, "line " + std::to_string(line) + ": bad label '" + v + "'");
}

double parse_double(const std::string& raw, std::size_t line) {
  try {
    std::size_t used = 0;
    const std::string v = trim(raw);
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::logic_error&) {
    fail(ErrorCode::kParseError, "line " + std::to_string(line) + ": bad number '" + raw + "'");
  }
}

std::vector<std::string> read_key_list(const std::string& spec) {
  std::vector<std::string> keys;
  if (fs::is_regular_file(spec)) {
    std::istringstream in(read_text(spec));
    for (std::string line; std::getline(in, line);) {
      line = trim(line);
      if (!line.empty() && line[0] != '#') keys.push_back(line);
    }
  } else {
    for (auto& k : split(spec, ',')) {
      k = trim(k);
      if (!k.empty()) keys.push_back(k);
    }
  }
  if (keys.empty()) fail(ErrorCode::kEmptyInput, "no tile keys given");
  return keys;
}

std::map<std::string, std::uint64_t> read_count_map(const fs::path& path) {
  const Json j = read_json(path);
  if (!j.is_object()) fail(ErrorCode::kParseError, path.string() + ": expected an object of counts");
  std::map<std::string, std::uint64_t> out;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number_unsigned()) {
      fail(ErrorCode::kParseError, path.string() + ": count for '" + key + "' is not a non-negative integer");
    }
    out[key] = value.get<std::uint64_t>();
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

int run_process(const ProcessArgs& a) {
  PipelineConfig config = a.config.empty() ? PipelineConfig{} : load_pipeline_config(a.config);
  apply_env_overrides(config);
  if (a.max_tiles) config.max_tiles = *a.max_tiles;
  if (a.conf_thresh) config.nms.conf_thresh = *a.conf_thresh;
  if (a.nms_iou) config.nms.nms_iou = *a.nms_iou;
  config.report_path = a.out;
  if (!a.run_record.empty()) config.run_record_path = a.run_record;
  if (!a.decisions.empty()) config.decisions_path = a.decisions;
  validate(config);

  const SlideHandle slide = open_slide(a.slide);
  const RunResult result = run_pipeline(config, slide);
  write_outputs(result, config);

  const RunRecord& r = result.record;
  if (r.status != RunStatus::kSuccess) {
    const std::string code = r.error_code.empty() ? std::string(to_string(ErrorCode::kPartialRun)) : r.error_code;
    std::cerr << Json{{"error", code}, {"message", r.error_message}}.dump() << "\n";
    return 1;
  }
  Json summary = {{"status", to_string(r.status)},
                  {"slide_id", r.slide_id},
                  {"tiles_streamed", r.tiles_streamed},
                  {"tiles_gated", r.tiles_gated},
                  {"tiles_processed", r.tiles_processed},
                  {"tiles_failed", r.tiles_failed},
                  {"converged", result.report->converged},
                  {"report", a.out}};
  std::cout << summary.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int run_eval_roi(const EvalRoiArgs& a) {
  std::istringstream in(read_text(a.scores));
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kEmptyInput, a.scores + " is empty");
  const auto header = split(trim(line), ',');
  int score_col = -1, label_col = -1, fold_col = -1;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    const std::string h = trim(header[i]);
    if (h == "score") score_col = i;
    if (h == "label") label_col = i;
    if (h == "fold") fold_col = i;
  }
  if (score_col < 0 || label_col < 0) {
    fail(ErrorCode::kParseError, "header must name 'score' and 'label' columns");
  }

  std::map<std::string, std::vector<ScoredLabel>> folds;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      fail(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": expected " +
                                       std::to_string(header.size()) + " columns");
    }
    const std::string fold = fold_col >= 0 ? trim(cells[fold_col]) : "all";
    folds[fold].push_back({parse_double(cells[score_col], line_no), parse_label(cells[label_col], line_no)});
  }
  if (folds.empty()) fail(ErrorCode::kEmptyInput, a.scores + " has no rows");

  Json out = {{"threshold", a.threshold}, {"folds", Json::array()}};
  std::vector<BinaryConfusion> confusions;
  std::vector<RocCurve> curves;
  for (const auto& [name, rows] : folds) {
    const BinaryConfusion c = confusion_at_threshold(rows, a.threshold);
    const RocCurve roc = roc_auc(rows);
    confusions.push_back(c);
    curves.push_back(roc);
    out["folds"].push_back({{"fold", name},
                            {"n", rows.size()},
                            {"confusion", {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}},
                            {"metrics", metrics_json(binary_metrics(c))},
                            {"auc", roc.auc}});
  }
  out["average"] = metrics_json(average_binary_metrics(confusions));
  out["mean_roc"] = roc_json(curves.size() == 1 ? curves.front() : mean_roc(curves, a.grid_points));
  emit(a.out, out.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

int run_eval_det(const EvalDetArgs& a) {
  const auto pred_records = read_annotation_dir(a.pred);
  const auto gt_records = read_annotation_dir(a.gt);
  const auto preds = annotations_to_detections(pred_records);
  const MatchResult m = match_detections(preds, gt_records, a.iou);
  const DetectionScorecard card = evaluate_detections(m);

  if (a.format == "json") {
    emit(a.out, to_json(card).dump(2) + "\n");
  } else {
    emit(a.out, scorecard_csv(card));
  }

  if (!a.confusion.empty()) {
    const ConfusionMatrix cm = confusion_matrix(preds, gt_records, a.iou);
    Json names = Json::array();
    for (CellClass c : cm.classes) names.push_back(class_name(c));
    write_text(a.confusion, Json{{"classes", names},
                                 {"counts", cm.counts},
                                 {"gt_totals", cm.gt_totals},
                                 {"rows", cm.rows},
                                 {"miss", cm.miss}}
                                    .dump(2) +
                                "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------

int run_dataset_split(const SplitArgs& a) {
  const DatasetManifest manifest = load_manifest(a.manifest);
  SplitOptions opts;
  opts.folds = a.folds;
  opts.validation_share = a.validation_share;
  opts.seed = a.seed;
  opts.small_strata = a.pool_small ? SmallStratumPolicy::kPool : SmallStratumPolicy::kThrow;
  const SplitPlan plan = stratified_split(manifest, opts);

  Json out = to_json(plan);
  Json keys = Json::array();
  for (const auto& r : manifest.records) keys.push_back(r.tile.key());
  out["keys"] = keys;
  for (const auto& w : plan.warnings) std::cerr << "warning: " << w << "\n";
  emit(a.out, out.dump(2) + "\n");
  return 0;
}

int run_dataset_augment(const AugmentArgs& a) {
  if (a.copies < 1) fail(ErrorCode::kInvalidConfig, "--copies must be at least 1");
  if (a.mix != "none" && a.mix != "cutmix" && a.mix != "mosaic") {
    fail(ErrorCode::kInvalidConfig, "--mix must be none, cutmix or mosaic");
  }
  if (a.fold.has_value() != !a.manifest.empty()) {
    fail(ErrorCode::kInvalidConfig, "--fold and --manifest go together");
  }
  auto items = read_pool(a.pool);
  std::size_t skipped = 0;
  if (a.fold) {
    const DatasetManifest manifest = load_manifest(a.manifest);
    SplitOptions opts;
    opts.folds = a.folds;
    opts.validation_share = a.validation_share;
    opts.seed = a.split_seed;
    opts.small_strata = a.pool_small ? SmallStratumPolicy::kPool : SmallStratumPolicy::kThrow;
    const SplitPlan plan = stratified_split(manifest, opts);
    if (*a.fold < 0 || *a.fold >= plan.folds) fail(ErrorCode::kInvalidConfig, "--fold out of range");
    std::set<std::string> train;
    for (std::size_t i : fold_view(plan, *a.fold).train) train.insert(manifest.records[i].tile.key());
    const auto before = items.size();
    std::erase_if(items, [&](const ReviewItem& it) { return !train.contains(it.predictions.tile.key()); });
    skipped = before - items.size();
  }
  if (items.empty()) fail(ErrorCode::kEmptyPool, "no training tiles in " + a.pool);

  std::vector<Sample> samples;
  samples.reserve(items.size());
  for (const auto& it : items) samples.push_back({read_png(it.image), it.predictions.boxes});

  std::size_t written = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string key = items[i].predictions.tile.key();
    for (int k = 0; k < a.copies; ++k) {
      const std::uint64_t seed = mix_seed(a.seed, fnv1a(key) + static_cast<std::uint64_t>(k));
      Sample s = samples[i];
      if (a.mix == "cutmix" && samples.size() > 1) {
        const std::size_t j = (i + 1 + seed % (samples.size() - 1)) % samples.size();
        s = cutmix(s, samples[j], seed);
      } else if (a.mix == "mosaic") {
        std::array<Sample, 4> four{s, samples[(i + 1) % samples.size()], samples[(i + 2) % samples.size()],
                                   samples[(i + 3) % samples.size()]};
        s = mosaic(four, seed);
      }
      // A crop that removes every box is retried with a fresh draw; after a
      // few misses the tile keeps only its photometric change.
      Sample geo = s;
      for (std::uint64_t attempt = 0; attempt < 8; ++attempt) {
        try {
          geo = augment_geometric(s, GeometricParams{}, mix_seed(seed, attempt));
          break;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kDegenerateCrop) throw;
        }
      }
      const Sample out = augment_photometric(geo, PhotometricParams{}, mix_seed(seed, 0x9e37));

      AnnotationRecord rec;
      rec.tile.file = key + "__aug" + std::to_string(k);
      rec.image_width = out.image.width();
      rec.image_height = out.image.height();
      rec.boxes = out.boxes;
      write_pool_item(a.out, rec, out.image);
      ++written;
    }
  }
  std::cout << Json{{"inputs", items.size()}, {"skipped", skipped}, {"written", written}, {"out", a.out}}.dump()
            << "\n";
  return 0;
}

int run_dataset_oversample(const OversampleArgs& a) {
  std::map<std::string, std::uint64_t> counts;
  if (!a.manifest.empty()) {
    counts = named_class_counts(load_manifest(a.manifest).class_counts());
  } else if (!a.counts.empty()) {
    counts = read_count_map(a.counts);
  } else {
    fail(ErrorCode::kInvalidConfig, "one of --manifest or --counts is required");
  }

  std::map<std::string, std::uint64_t> targets;
  if (a.factor) {
    if (*a.factor == 0) fail(ErrorCode::kInvalidConfig, "--factor must be positive");
    targets = targets_from_factor(counts, *a.factor);
  } else if (!a.targets.empty()) {
    targets = read_count_map(a.targets);
  } else {
    fail(ErrorCode::kInvalidConfig, "one of --factor or --targets is required");
  }

  const OversamplePlan plan = oversample_plan(counts, targets, a.seed);
  Json out = to_json(plan);
  std::uint64_t before = 0, after = 0;
  for (const auto& [key, n] : counts) {
    before += n;
    const OversampleEntry* e = plan.find(key);
    after += e ? e->planned_total() : n;
  }
  out["total_before"] = before;
  out["total_after"] = after;
  emit(a.out, out.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

int run_al_query(const QueryArgs& a) {
  const auto items = read_pool(a.pool);
  const DatasetManifest manifest = a.manifest.empty() ? DatasetManifest{} : load_manifest(a.manifest);
  std::vector<AnnotationRecord> candidates;
  candidates.reserve(items.size());
  for (const auto& it : items) candidates.push_back(it.predictions);

  const auto chosen = query_rare_tiles(manifest, candidates, QueryOptions{a.n, a.seed});
  std::map<std::string, const ReviewItem*> by_key;
  for (const auto& it : items) by_key.emplace(it.predictions.tile.key(), &it);
  std::vector<ReviewItem> selected;
  for (const auto& rec : chosen) selected.push_back(*by_key.at(rec.tile.key()));

  const auto queue = export_review_package(a.out, selected);
  std::cout << Json{{"package", a.out}, {"tiles", queue.size()}}.dump() << "\n";
  return 0;
}

int run_al_export(const ExportArgs& a) {
  const auto items = read_pool(a.pool);
  std::map<std::string, const ReviewItem*> by_key;
  for (const auto& it : items) by_key.emplace(it.predictions.tile.key(), &it);

  std::vector<ReviewItem> selected;
  for (const auto& key : read_key_list(a.keys)) {
    const auto it = by_key.find(key);
    if (it == by_key.end()) fail(ErrorCode::kUnknownTileRef, "tile " + key + " is not in " + a.pool);
    selected.push_back(*it->second);
  }
  const auto queue = export_review_package(a.out, selected);
  std::cout << Json{{"package", a.out}, {"tiles", queue.size()}}.dump() << "\n";
  return 0;
}

int run_al_merge(const MergeArgs& a) {
  if (a.package.empty() == a.corrections.empty()) {
    fail(ErrorCode::kInvalidConfig, "give exactly one of --package or --corrections");
  }
  if (!a.package.empty()) {
    ReviewStore store(a.package, a.manifest);
    const MergeOutcome m = store.merge();
    std::cout << Json{{"version", m.version},
                      {"changed", m.changed},
                      {"tiles", m.tiles},
                      {"class_deltas", m.class_deltas},
                      {"class_counts", named_class_counts(m.class_counts)}}
                     .dump()
              << "\n";
    return 0;
  }
  const DatasetManifest manifest = load_manifest(a.manifest);
  const auto corrections = read_annotation_dir(a.corrections);
  const DatasetManifest merged = merge_confirmed(manifest, corrections);
  const bool changed = !(merged == manifest);
  if (changed) save_manifest(a.manifest, merged);
  std::cout << Json{{"version", merged.version}, {"changed", changed}, {"tiles", corrections.size()}}.dump()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int run_serve_review(const ServeReviewArgs& a) {
  ReviewStore store(a.package, a.manifest);
  (void)store.queue();  // surface a missing or malformed package before binding
  ReviewServer server(store);
  std::cerr << "serving review package " << a.package << " on http://" << a.host << ":" << a.port << "\n";
  server.listen(a.host, a.port);
  return 0;
}

int run_serve_backend(const ServeBackendArgs& a) {
  std::unique_ptr<TileClassifierBackend> roi;
  std::unique_ptr<DetectorBackend> det;
  if (a.roi == "synthetic") {
    SyntheticRoiBackend::Options o;
    o.saturation_count = a.saturation_count;
    roi = std::make_unique<SyntheticRoiBackend>(o);
  } else if (a.roi != "none") {
    fail(ErrorCode::kInvalidConfig, "--roi must be synthetic or none");
  }
  if (a.detector == "synthetic") {
    det = std::make_unique<SyntheticDetector>();
  } else if (a.detector != "none") {
    fail(ErrorCode::kInvalidConfig, "--detector must be synthetic or none");
  }
  BackendServer server(roi.get(), det.get());
  std::cerr << "serving inference backends on http://" << a.host << ":" << a.port << "\n";
  server.listen(a.host, a.port);
  return 0;
}

int run_synth_slide(const SynthSlideArgs& a) {
  synthetic::SlideSpec spec;
  spec.slide_id = a.slide_id;
  spec.seed = a.seed;
  spec.roi_fraction = a.roi_fraction;
  const synthetic::SyntheticSlide slide(spec);

  if (a.format == "tiff") {
    slide.write_tiff(a.out);
  } else if (a.format == "manifest") {
    slide.write_manifest(a.out);
  } else {
    fail(ErrorCode::kInvalidConfig, "--format must be manifest or tiff");
  }

  if (!a.ground_truth.empty()) fs::create_directories(a.ground_truth);
  std::size_t roi_tiles = 0;
  SyntheticDetector detector;
  const TileGrid& grid = slide.grid();
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const GridCoord coord{r, c};
      if (slide.kind(coord) != synthetic::TileKind::kRoi) continue;
      ++roi_tiles;
      const AnnotationRecord gt = slide.ground_truth(coord);
      if (!a.ground_truth.empty()) {
        write_annotation_file(fs::path(a.ground_truth) / (gt.tile.key() + ".txt"), gt,
                              AnnotationFormat::kYoloTxt);
      }
      if (!a.pool.empty()) {
        const auto [x, y] = grid.tile_origin(coord);
        Tile tile{coord, x, y, slide.render(x, y, grid.tile_px, grid.tile_px), spec.slide_id};
        const auto dets = diou_nms(detect_raw(detector, tile));
        AnnotationRecord pred;
        pred.tile = gt.tile;
        pred.image_width = pred.image_height = grid.tile_px;
        if (!dets.empty()) pred = detections_to_annotations(dets, grid.tile_px).front();
        write_pool_item(a.pool, pred, tile.pixels);
      }
    }
  }
  std::cout << Json{{"slide", a.out}, {"roi_tiles", roi_tiles}, {"cells", slide.cells().size()}}.dump() << "\n";
  return 0;
}

}  // namespace marrow::cli
