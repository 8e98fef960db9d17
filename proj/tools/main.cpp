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

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "marrow/error.hpp"

namespace {

constexpr int kExitOperational = 1;
constexpr int kExitUsage = 2;

void print_error(const std::string& code, const std::string& message) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  using namespace marrow::cli;

  CLI::App app{"marrow: bone-marrow aspirate cytology pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "marrow 0.1.0");

  int status = 0;

  // process ----------------------------------------------------------------
  ProcessArgs proc;
  auto* process = app.add_subcommand("process", "Run the slide pipeline and write an NDC report");
  process->add_option("--slide", proc.slide, "Slide (pyramidal TIFF or tile-manifest directory)")->required();
  process->add_option("--config", proc.config, "Pipeline config JSON");
  process->add_option("--out", proc.out, "Report path")->required();
  process->add_option("--run-record", proc.run_record, "Run record path");
  process->add_option("--decisions", proc.decisions, "ROI decision log path");
  process->add_option("--max-tiles", proc.max_tiles, "Cap on accumulated tiles");
  process->add_option("--conf-thresh", proc.conf_thresh, "Detector confidence threshold");
  process->add_option("--nms-iou", proc.nms_iou, "DIoU-NMS overlap threshold");
  process->callback([&] { status = run_process(proc); });

  // eval-roi ---------------------------------------------------------------
  EvalRoiArgs roi;
  auto* eval_roi = app.add_subcommand("eval-roi", "Binary ROI metrics and ROC from scored tiles");
  eval_roi->add_option("--scores", roi.scores, "CSV with score,label[,fold] columns")->required();
  eval_roi->add_option("--threshold", roi.threshold, "Decision threshold")->capture_default_str();
  eval_roi->add_option("--grid", roi.grid_points, "Points of the averaged ROC grid")->capture_default_str();
  eval_roi->add_option("--out", roi.out, "Output JSON (stdout if omitted)");
  eval_roi->callback([&] { status = run_eval_roi(roi); });

  // eval-det ---------------------------------------------------------------
  EvalDetArgs det;
  auto* eval_det = app.add_subcommand("eval-det", "Detection scorecard from prediction and ground-truth folders");
  eval_det->add_option("--pred", det.pred, "Prediction annotations")->required();
  eval_det->add_option("--gt", det.gt, "Ground-truth annotations")->required();
  eval_det->add_option("--iou", det.iou, "Match threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  eval_det->add_option("--format", det.format, "csv or json")
      ->capture_default_str()
      ->check(CLI::IsMember({"csv", "json"}));
  eval_det->add_option("--out", det.out, "Scorecard path (stdout if omitted)");
  eval_det->add_option("--confusion", det.confusion, "Also write the confusion matrix JSON here");
  eval_det->callback([&] { status = run_eval_det(det); });

  // dataset ----------------------------------------------------------------
  auto* dataset = app.add_subcommand("dataset", "Dataset splits, augmentation and oversampling");
  dataset->require_subcommand(1);

  SplitArgs sp;
  auto* split = dataset->add_subcommand("split", "Stratified k-fold split of a manifest");
  split->add_option("--manifest", sp.manifest, "Dataset manifest")->required();
  split->add_option("--folds", sp.folds)->capture_default_str();
  split->add_option("--validation-share", sp.validation_share)->capture_default_str();
  split->add_option("--seed", sp.seed)->capture_default_str();
  split->add_flag("--pool-small", sp.pool_small, "Pool strata smaller than the fold count");
  split->add_option("--out", sp.out, "Split plan JSON (stdout if omitted)");
  split->callback([&] { status = run_dataset_split(sp); });

  AugmentArgs au;
  auto* augment = dataset->add_subcommand("augment", "Write augmented copies of a tile folder");
  augment->add_option("--input", au.pool, "Folder with images/ and labels/")->required();
  augment->add_option("--out", au.out, "Output folder")->required();
  augment->add_option("--copies", au.copies)->capture_default_str();
  augment->add_option("--seed", au.seed)->capture_default_str();
  augment->add_option("--mix", au.mix)->capture_default_str()->check(CLI::IsMember({"none", "cutmix", "mosaic"}));
  auto* au_manifest = augment->add_option("--manifest", au.manifest, "Manifest the split is computed from");
  auto* au_fold = augment->add_option("--fold", au.fold, "Augment only this fold's training tiles");
  au_fold->needs(au_manifest);
  au_manifest->needs(au_fold);
  augment->add_option("--folds", au.folds)->capture_default_str();
  augment->add_option("--validation-share", au.validation_share)->capture_default_str();
  augment->add_option("--split-seed", au.split_seed)->capture_default_str();
  augment->add_flag("--pool-small", au.pool_small, "Pool strata smaller than the fold count");
  augment->callback([&] { status = run_dataset_augment(au); });

  OversampleArgs os;
  auto* oversample = dataset->add_subcommand("oversample", "Deterministic oversampling plan");
  auto* os_manifest = oversample->add_option("--manifest", os.manifest, "Take class counts from a manifest");
  auto* os_counts = oversample->add_option("--counts", os.counts, "JSON object of stratum counts");
  os_manifest->excludes(os_counts);
  auto* os_targets = oversample->add_option("--targets", os.targets, "JSON object of stratum targets");
  auto* os_factor = oversample->add_option("--factor", os.factor, "Uniform multiplication factor");
  os_targets->excludes(os_factor);
  oversample->add_option("--seed", os.seed)->capture_default_str();
  oversample->add_option("--out", os.out, "Plan JSON (stdout if omitted)");
  oversample->callback([&] { status = run_dataset_oversample(os); });

  // al ---------------------------------------------------------------------
  auto* al = app.add_subcommand("al", "Active-learning query, export and merge");
  al->require_subcommand(1);

  QueryArgs q;
  auto* query = al->add_subcommand("query", "Select rare-class tiles into a review package");
  query->add_option("--pool", q.pool, "Candidate pool folder")->required();
  query->add_option("--manifest", q.manifest, "Current dataset manifest");
  query->add_option("--n", q.n, "Batch size")->capture_default_str();
  query->add_option("--seed", q.seed)->capture_default_str();
  query->add_option("--out", q.out, "Review package folder")->required();
  query->callback([&] { status = run_al_query(q); });

  ExportArgs ex;
  auto* exp = al->add_subcommand("export", "Package chosen pool tiles for review");
  exp->add_option("--pool", ex.pool, "Candidate pool folder")->required();
  exp->add_option("--keys", ex.keys, "Key file (one per line) or comma-separated keys")->required();
  exp->add_option("--out", ex.out, "Review package folder")->required();
  exp->callback([&] { status = run_al_export(ex); });

  MergeArgs mg;
  auto* merge = al->add_subcommand("merge", "Merge reviewed corrections into the manifest");
  merge->add_option("--manifest", mg.manifest, "Dataset manifest")->required();
  auto* mg_pkg = merge->add_option("--package", mg.package, "Review package with stored corrections");
  auto* mg_corr = merge->add_option("--corrections", mg.corrections, "Folder of corrected annotations");
  mg_pkg->excludes(mg_corr);
  merge->callback([&] { status = run_al_merge(mg); });

  // servers ----------------------------------------------------------------
  ServeReviewArgs sr;
  auto* serve_review = app.add_subcommand("serve-review", "HTTP review service over a package");
  serve_review->add_option("--package", sr.package, "Review package folder")->required();
  serve_review->add_option("--manifest", sr.manifest, "Dataset manifest")->required();
  serve_review->add_option("--host", sr.host)->capture_default_str();
  serve_review->add_option("--port", sr.port)->capture_default_str();
  serve_review->callback([&] { status = run_serve_review(sr); });

  ServeBackendArgs sb;
  auto* serve_backend = app.add_subcommand("serve-backend", "Serve the synthetic inference backends over HTTP");
  serve_backend->add_option("--roi", sb.roi)->capture_default_str()->check(CLI::IsMember({"synthetic", "none"}));
  serve_backend->add_option("--detector", sb.detector)
      ->capture_default_str()
      ->check(CLI::IsMember({"synthetic", "none"}));
  serve_backend->add_option("--saturation-count", sb.saturation_count)->capture_default_str();
  serve_backend->add_option("--host", sb.host)->capture_default_str();
  serve_backend->add_option("--port", sb.port)->capture_default_str();
  serve_backend->callback([&] { status = run_serve_backend(sb); });

  SynthSlideArgs ss;
  auto* synth = app.add_subcommand("synth-slide", "Write a synthetic slide for demos and tests");
  synth->add_option("--out", ss.out, "Output (directory for manifest, file for tiff)")->required();
  synth->add_option("--format", ss.format)->capture_default_str()->check(CLI::IsMember({"manifest", "tiff"}));
  synth->add_option("--slide-id", ss.slide_id)->capture_default_str();
  synth->add_option("--seed", ss.seed)->capture_default_str();
  synth->add_option("--roi-fraction", ss.roi_fraction)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  synth->add_option("--ground-truth", ss.ground_truth, "Write ROI-tile ground truth (yolo) here");
  synth->add_option("--pool", ss.pool, "Write ROI tiles with synthetic predictions here");
  synth->callback([&] { status = run_synth_slide(ss); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return kExitUsage;
  } catch (const marrow::Error& e) {
    print_error(std::string(marrow::to_string(e.code())), e.what());
    return kExitOperational;
  } catch (const std::exception& e) {
    print_error("Internal", e.what());
    return kExitOperational;
  }
  return status;
}
