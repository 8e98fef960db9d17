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

#include "marrow/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <future>
#include <set>

#include "marrow/error.hpp"
#include "marrow/synthetic.hpp"
#include "marrow/wire.hpp"

namespace marrow {
namespace {

using Json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::kInvalidConfig, where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.contains(key)) fail(ErrorCode::kInvalidConfig, "unknown config key " + where + "." + key);
  }
}

Json section(const Json& j, const char* key) {
  return j.contains(key) ? j.at(key) : Json::object();
}

Json backend_to_json(const BackendConfig& b) {
  Json j = {{"kind", b.kind}, {"saturation_count", b.saturation_count}, {"mean_objects", b.mean_objects}};
  if (!b.endpoint.empty()) j["endpoint"] = b.endpoint;
  if (!b.class_weights.empty()) j["class_weights"] = b.class_weights;
  return j;
}

BackendConfig backend_from_json(const Json& j, const std::string& where) {
  check_keys(j, {"kind", "endpoint", "saturation_count", "mean_objects", "class_weights"}, where);
  BackendConfig b;
  b.kind = j.value("kind", b.kind);
  b.endpoint = j.value("endpoint", b.endpoint);
  b.saturation_count = j.value("saturation_count", b.saturation_count);
  b.mean_objects = j.value("mean_objects", b.mean_objects);
  b.class_weights = j.value("class_weights", b.class_weights);
  return b;
}

void write_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path);
  out << text;
  if (!out.flush()) fail(ErrorCode::kIoError, "write failed for " + path);
}

struct TileOutcome {
  GridCoord coord;
  std::optional<RoiDecision> decision;
  std::vector<Detection> detections;
  std::optional<ErrorCode> error_code;
  std::string error;
  double score_seconds = 0.0;
  double detect_seconds = 0.0;
};

bool is_tile_level(ErrorCode c) {
  return c == ErrorCode::kReadFailure || c == ErrorCode::kOutOfBounds ||
         c == ErrorCode::kInferenceFailure || c == ErrorCode::kUnknownClassId;
}

}  // namespace

void validate(const PipelineConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::kInvalidConfig, what);
  };
  require(c.grid_rows >= 1 && c.grid_cols >= 1 && c.tile_px >= 1, "grid dimensions must be positive");
  require(c.roi_threshold >= 0.0 && c.roi_threshold <= 1.0, "roi threshold must be in [0,1]");
  require(c.nms.conf_thresh >= 0.0 && c.nms.conf_thresh <= 1.0, "conf_thresh must be in [0,1]");
  require(c.nms.nms_iou >= -1.0 && c.nms.nms_iou <= 1.0, "nms_iou must be in [-1,1]");
  require(c.convergence.threshold > 0.0 && std::isfinite(c.convergence.threshold),
          "convergence threshold must be positive");
  require(c.convergence.patience >= 1, "patience must be >= 1");
  require(c.max_tiles >= 1, "max_tiles must be >= 1");
  require(c.workers >= 1, "workers must be >= 1");
  require(c.read_ahead >= 1, "read_ahead must be >= 1");
  require(c.failure_tolerance >= 0.0 && c.failure_tolerance <= 1.0,
          "failure_tolerance must be in [0,1]");
  const std::set<std::string> roi_kinds{"synthetic", "http"};
  const std::set<std::string> det_kinds{"synthetic", "sampling", "http"};
  require(roi_kinds.contains(c.roi_backend.kind), "unknown roi backend kind " + c.roi_backend.kind);
  require(det_kinds.contains(c.detector_backend.kind),
          "unknown detector backend kind " + c.detector_backend.kind);
  require(c.roi_backend.kind != "http" || !c.roi_backend.endpoint.empty(), "roi endpoint missing");
  require(c.detector_backend.kind != "http" || !c.detector_backend.endpoint.empty(),
          "detector endpoint missing");
  require(c.detector_backend.class_weights.empty() ||
              c.detector_backend.class_weights.size() == kNumClasses,
          "class_weights must list 19 values");
}

PipelineConfig pipeline_config_from_json(const Json& j) {
  try {
    check_keys(j, {"grid", "order", "roi", "detector", "convergence", "seeds", "execution", "output"},
               "config");
    PipelineConfig c;
    const Json grid = section(j, "grid");
    check_keys(grid, {"rows", "cols", "tile_px"}, "grid");
    c.grid_rows = grid.value("rows", c.grid_rows);
    c.grid_cols = grid.value("cols", c.grid_cols);
    c.tile_px = grid.value("tile_px", c.tile_px);

    const std::string order = j.value("order", std::string("shuffle"));
    if (order == "row_major") c.order = TileOrder::kRowMajor;
    else if (order == "shuffle") c.order = TileOrder::kSeededShuffle;
    else fail(ErrorCode::kInvalidConfig, "order must be row_major or shuffle");

    const Json roi = section(j, "roi");
    check_keys(roi, {"threshold", "backend"}, "roi");
    c.roi_threshold = roi.value("threshold", c.roi_threshold);
    c.roi_backend = backend_from_json(section(roi, "backend"), "roi.backend");

    const Json det = section(j, "detector");
    check_keys(det, {"conf_thresh", "nms_iou", "backend"}, "detector");
    c.nms.conf_thresh = det.value("conf_thresh", c.nms.conf_thresh);
    c.nms.nms_iou = det.value("nms_iou", c.nms.nms_iou);
    c.detector_backend = backend_from_json(section(det, "backend"), "detector.backend");

    const Json conv = section(j, "convergence");
    check_keys(conv, {"threshold", "patience", "max_tiles", "stop_on_convergence"}, "convergence");
    c.convergence.threshold = conv.value("threshold", c.convergence.threshold);
    c.convergence.patience = conv.value("patience", c.convergence.patience);
    c.max_tiles = conv.value("max_tiles", c.max_tiles);
    c.stop_on_convergence = conv.value("stop_on_convergence", c.stop_on_convergence);

    const Json seeds = section(j, "seeds");
    check_keys(seeds, {"order", "detector"}, "seeds");
    c.order_seed = seeds.value("order", c.order_seed);
    c.detector_seed = seeds.value("detector", c.detector_seed);

    const Json exec = section(j, "execution");
    check_keys(exec, {"workers", "read_ahead", "failure_tolerance"}, "execution");
    c.workers = exec.value("workers", c.workers);
    c.read_ahead = exec.value("read_ahead", c.read_ahead);
    c.failure_tolerance = exec.value("failure_tolerance", c.failure_tolerance);

    const Json out = section(j, "output");
    check_keys(out, {"report", "run_record", "decisions"}, "output");
    c.report_path = out.value("report", c.report_path);
    c.run_record_path = out.value("run_record", c.run_record_path);
    c.decisions_path = out.value("decisions", c.decisions_path);

    validate(c);
    return c;
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidConfig, std::string("config: ") + e.what());
  }
}

Json config_snapshot(const PipelineConfig& c) {
  return {{"grid", {{"rows", c.grid_rows}, {"cols", c.grid_cols}, {"tile_px", c.tile_px}}},
          {"order", c.order == TileOrder::kRowMajor ? "row_major" : "shuffle"},
          {"roi", {{"threshold", c.roi_threshold}, {"backend", backend_to_json(c.roi_backend)}}},
          {"detector",
           {{"conf_thresh", c.nms.conf_thresh},
            {"nms_iou", c.nms.nms_iou},
            {"backend", backend_to_json(c.detector_backend)}}},
          {"convergence",
           {{"threshold", c.convergence.threshold},
            {"patience", c.convergence.patience},
            {"max_tiles", c.max_tiles},
            {"stop_on_convergence", c.stop_on_convergence}}},
          {"seeds", {{"order", c.order_seed}, {"detector", c.detector_seed}}},
          {"execution",
           {{"workers", c.workers},
            {"read_ahead", c.read_ahead},
            {"failure_tolerance", c.failure_tolerance}}}};
}

Json to_json(const PipelineConfig& c) {
  Json j = config_snapshot(c);
  j["output"] = {{"report", c.report_path},
                 {"run_record", c.run_record_path},
                 {"decisions", c.decisions_path}};
  return j;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kNotFound, "cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j);
}

void apply_env_overrides(PipelineConfig& c) {
  if (const char* roi = std::getenv("MARROW_ROI_ENDPOINT"); roi && *roi) {
    c.roi_backend.kind = "http";
    c.roi_backend.endpoint = roi;
  }
  if (const char* det = std::getenv("MARROW_DETECTOR_ENDPOINT"); det && *det) {
    c.detector_backend.kind = "http";
    c.detector_backend.endpoint = det;
  }
}

std::unique_ptr<TileClassifierBackend> make_roi_backend(const BackendConfig& c) {
  if (c.kind == "http") return std::make_unique<HttpRoiBackend>(parse_endpoint(c.endpoint));
  if (c.kind == "synthetic") {
    SyntheticRoiBackend::Options o;
    o.saturation_count = c.saturation_count;
    return std::make_unique<SyntheticRoiBackend>(o);
  }
  fail(ErrorCode::kInvalidConfig, "unknown roi backend kind " + c.kind);
}

std::unique_ptr<DetectorBackend> make_detector_backend(const BackendConfig& c, std::uint64_t seed) {
  if (c.kind == "http") return std::make_unique<HttpDetectorBackend>(parse_endpoint(c.endpoint));
  if (c.kind == "synthetic") return std::make_unique<SyntheticDetector>();
  if (c.kind == "sampling") {
    std::array<double, kNumClasses> w = synthetic::reference_class_counts();
    if (!c.class_weights.empty()) {
      if (c.class_weights.size() != kNumClasses) {
        fail(ErrorCode::kInvalidConfig, "class_weights must list 19 values");
      }
      std::copy(c.class_weights.begin(), c.class_weights.end(), w.begin());
    }
    const double mean = c.mean_objects > 0.0 ? c.mean_objects : synthetic::kReferenceObjectsPerTile;
    return std::make_unique<SamplingDetector>(w, mean, seed);
  }
  fail(ErrorCode::kInvalidConfig, "unknown detector backend kind " + c.kind);
}

std::string_view to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::kSuccess: return "success";
    case RunStatus::kPartialRun: return "partial_run";
    case RunStatus::kFailed: return "failed";
  }
  return "unknown";
}

Json to_json(const RunRecord& r) {
  Json j = {{"config", r.config},
            {"slide_id", r.slide_id},
            {"stage_seconds", r.stage_seconds},
            {"worker_seconds", r.worker_seconds},
            {"wall_seconds", r.wall_seconds},
            {"tiles_streamed", r.tiles_streamed},
            {"tiles_gated", r.tiles_gated},
            {"tiles_processed", r.tiles_processed},
            {"tiles_failed", r.tiles_failed},
            {"status", to_string(r.status)}};
  if (!r.error_code.empty()) {
    j["error"] = {{"code", r.error_code}, {"message", r.error_message}};
  }
  if (!r.report_path.empty()) j["report"] = r.report_path;
  return j;
}

RunResult run_pipeline(const PipelineConfig& config, const SlideHandle& slide,
                       TileClassifierBackend& roi, DetectorBackend& detector) {
  const auto t_start = Clock::now();
  validate(config);
  RunResult result;
  RunRecord& rec = result.record;
  rec.config = config_snapshot(config);
  rec.slide_id = slide.id;
  rec.report_path = config.report_path;

  roi.check_available();
  detector.check_available();
  CapacityLimiter roi_limit(roi.info().max_concurrency);
  CapacityLimiter det_limit(detector.info().max_concurrency);
  const TileGrid grid = make_grid(slide, config.grid_rows, config.grid_cols, config.tile_px);
  TileStream stream = iterate_tiles(slide, grid, config.order, config.order_seed, config.read_ahead);
  rec.stage_seconds["setup"] = seconds_since(t_start);

  auto work = [&](TileResult tr) {
    TileOutcome out;
    out.coord = tr.coord;
    if (!tr.tile) {
      out.error_code = ErrorCode::kReadFailure;
      out.error = tr.error;
      return out;
    }
    try {
      auto t0 = Clock::now();
      RoiScore score;
      {
        auto slot = roi_limit.slot();
        score = score_tile(roi, *tr.tile);
      }
      out.decision = gate(score, config.roi_threshold);
      out.score_seconds = seconds_since(t0);
      if (out.decision->accepted) {
        t0 = Clock::now();
        std::vector<Detection> raw;
        {
          auto slot = det_limit.slot();
          raw = detect_raw(detector, *tr.tile);
        }
        out.detections = diou_nms(raw, config.nms);
        out.detect_seconds = seconds_since(t0);
      }
    } catch (const Error& e) {
      out.error_code = e.code();
      out.error = e.what();
    }
    return out;
  };

  Ihct ihct;
  ihct.params = config.convergence;
  const AccumulateMode mode =
      config.stop_on_convergence ? AccumulateMode::kStrict : AccumulateMode::kForced;
  std::deque<std::future<TileOutcome>> inflight;
  auto launch = [&] {
    while (inflight.size() < config.workers) {
      auto next = stream.next();
      if (!next) return;
      inflight.push_back(std::async(std::launch::async, work, std::move(*next)));
    }
  };

  double wait_s = 0.0;
  double commit_s = 0.0;
  std::optional<Error> fatal;
  launch();
  while (!inflight.empty()) {
    auto t0 = Clock::now();
    TileOutcome out = inflight.front().get();
    inflight.pop_front();
    wait_s += seconds_since(t0);

    t0 = Clock::now();
    ++rec.tiles_streamed;
    rec.worker_seconds["score"] += out.score_seconds;
    rec.worker_seconds["detect"] += out.detect_seconds;
    if (out.error_code) {
      if (!is_tile_level(*out.error_code)) {
        fatal.emplace(*out.error_code, out.error);
        break;
      }
      ++rec.tiles_failed;
    } else {
      result.decisions.push_back(*out.decision);
      if (out.decision->accepted) {
        ++rec.tiles_gated;
        Hct hct = hct_from_detections(out.detections);
        hct.tile_coord = out.coord;
        accumulate_into(ihct, hct, mode);
        ++rec.tiles_processed;
      }
    }
    commit_s += seconds_since(t0);
    const bool done = rec.tiles_processed >= config.max_tiles ||
                      (config.stop_on_convergence && ihct.converged);
    if (done) break;
    t0 = Clock::now();
    launch();
    wait_s += seconds_since(t0);
  }
  {
    const auto t0 = Clock::now();
    for (auto& f : inflight) f.wait();
    inflight.clear();
    wait_s += seconds_since(t0);
  }
  rec.stage_seconds["stream_wait"] = wait_s;
  rec.stage_seconds["commit"] = commit_s;
  if (fatal) throw *fatal;

  const auto t_final = Clock::now();
  const double failed_fraction =
      rec.tiles_streamed == 0 ? 0.0
                              : static_cast<double>(rec.tiles_failed) / static_cast<double>(rec.tiles_streamed);
  if (failed_fraction > config.failure_tolerance) {
    rec.status = RunStatus::kPartialRun;
    rec.error_code = std::string(to_string(ErrorCode::kPartialRun));
    rec.error_message = std::to_string(rec.tiles_failed) + " of " + std::to_string(rec.tiles_streamed) +
                        " tiles failed, above the tolerance";
  } else if (convergence_subtotal(ihct.counts) == 0) {
    rec.status = RunStatus::kFailed;
    rec.error_code = std::string(to_string(ErrorCode::kEmptyHistogram));
    rec.error_message = "no cells counted on " + std::to_string(rec.tiles_processed) + " accepted tiles";
  } else {
    result.report = ndc_report(ihct, slide.id);
  }
  rec.stage_seconds["finalize"] = seconds_since(t_final);
  rec.wall_seconds = seconds_since(t_start);
  return result;
}

RunResult run_pipeline(const PipelineConfig& config, const SlideHandle& slide) {
  validate(config);
  auto roi = make_roi_backend(config.roi_backend);
  auto det = make_detector_backend(config.detector_backend, config.detector_seed);
  return run_pipeline(config, slide, *roi, *det);
}

Json report_document(const NdcReport& report, const PipelineConfig& config) {
  Json j = to_json(report);
  j["config"] = config_snapshot(config);
  return j;
}

void write_outputs(const RunResult& result, const PipelineConfig& config) {
  if (result.report && !config.report_path.empty()) {
    write_file(config.report_path, report_document(*result.report, config).dump(2) + "\n");
  }
  if (!config.run_record_path.empty()) {
    write_file(config.run_record_path, to_json(result.record).dump(2) + "\n");
  }
  if (!config.decisions_path.empty()) {
    std::string lines;
    for (const auto& d : result.decisions) lines += decision_log_line(d) + "\n";
    write_file(config.decisions_path, lines);
  }
}

}  // namespace marrow
