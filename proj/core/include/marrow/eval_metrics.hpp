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

#ifndef MARROW_EVAL_METRICS_HPP_
#define MARROW_EVAL_METRICS_HPP_

// Evaluation metrics for the ROI gate (binary metrics, ROC), the detector
// (matching, 11-point AP, P/R/F1, LAMR, confusion matrix) and the end-to-end
// differential count (MSE against manual counts).

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marrow/annotation.hpp"
#include "marrow/cell_class.hpp"
#include "marrow/detection.hpp"

namespace marrow {

// ---------------------------------------------------------------------------
// Binary classification

struct BinaryConfusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
};

/// Each rate is nullopt when its denominator is zero.
struct BinaryMetrics {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> specificity;
  std::optional<double> npv;
};

/// Throws kEmptyConfusion when all four counts are zero.
BinaryMetrics binary_metrics(const BinaryConfusion& c);

/// Cross-validation average: per-metric mean over the folds where the metric
/// is defined.
BinaryMetrics average_binary_metrics(std::span<const BinaryConfusion> folds);

struct ScoredLabel {
  double score = 0.0;
  bool positive = false;
};

/// Confusion of the rule "positive iff score >= threshold".
BinaryConfusion confusion_at_threshold(std::span<const ScoredLabel> scored, double threshold);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // +inf for the origin
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0.0;
};

/// Threshold sweep over distinct scores (equal scores form one step), AUC by
/// the trapezoid rule. Throws kSingleClassInput unless both labels occur.
RocCurve roc_auc(std::span<const ScoredLabel> scored);

/// Vertical averaging of fold curves: TPR interpolated at `grid_points`
/// evenly spaced FPR values, then averaged. Throws kEmptyInput.
RocCurve mean_roc(std::span<const RocCurve> folds, std::size_t grid_points = 101);

// ---------------------------------------------------------------------------
// Detection matching

struct PredictionMatch {
  std::size_t pred_index = 0;  // index into the prediction input
  std::string image_key;
  CellClass cls = CellClass::kNeutrophil;
  double confidence = 0.0;
  bool true_positive = false;
  std::optional<std::size_t> gt_index;
};

struct GroundTruthMatch {
  std::string image_key;
  BBox bbox;
  CellClass cls = CellClass::kNeutrophil;
  std::optional<std::size_t> pred_index;
};

struct MatchResult {
  /// Predictions in evaluation rank order (see ranks_before).
  std::vector<PredictionMatch> predictions;
  std::vector<GroundTruthMatch> ground_truths;
  double iou_threshold = 0.5;
  std::size_t images = 0;
};

/// Image key of a prediction: the TileRef key of its slide and coordinate.
std::string image_key(const Detection& d);

/// Greedy matching in rank order: each prediction takes the unmatched
/// same-class ground truth in the same image with the highest IoU >=
/// iou_threshold (ties to the lower gt index). Unmatched predictions are
/// false positives, unmatched ground truths are misses.
MatchResult match_detections(std::span<const Detection> preds,
                             std::span<const AnnotationRecord> gts, double iou_threshold = 0.5);

/// Cumulative counts after each ranked prediction of one class.
struct PrPoint {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  double precision() const noexcept { return static_cast<double>(tp) / static_cast<double>(tp + fp); }
};

struct PrCurve {
  std::uint64_t positives = 0;  // ground truths of the class
  std::vector<PrPoint> points;
};

PrCurve pr_curve(const MatchResult& m, CellClass cls);

/// Mean over recall levels r in {0, 0.1, ..., 1} of the maximum precision
/// at recall >= r (0 when unreached). Throws kNoGroundTruth.
double average_precision_11pt(const MatchResult& m, CellClass cls);

struct ClassPrf {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t positives = 0;
  double precision = 0.0;  // 0 when nothing was predicted
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision, recall and F1 over all predictions of the class. Throws
/// kNoGroundTruth.
ClassPrf precision_recall_f1(const MatchResult& m, CellClass cls);

struct LamrOptions {
  std::size_t samples = 9;
  double fppi_min = 1e-2;
  double fppi_max = 1.0;
  double miss_floor = 1e-10;
};

/// Log-average miss rate: geometric mean of the lowest miss rate reached at
/// FPPI <= f over `samples` log-spaced f in [fppi_min, fppi_max]. `images`
/// defaults to m.images. Throws kNoGroundTruth, or kEmptyInput for zero
/// images.
double log_average_miss_rate(const MatchResult& m, CellClass cls,
                             std::optional<std::size_t> images = std::nullopt,
                             const LamrOptions& options = {});

struct ClassScore {
  CellClass cls = CellClass::kNeutrophil;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double lamr = 0.0;
  double ap = 0.0;
};

struct DetectionScorecard {
  std::vector<ClassScore> classes;
  double map = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;
  double mean_lamr = 0.0;
};

/// Unweighted means of the per-class rows. Throws kEmptyInput.
DetectionScorecard map_and_f1(std::span<const ClassScore> rows);

/// Per-class rows for every class in `classes` that has ground truth, then
/// aggregated with map_and_f1.
DetectionScorecard evaluate_detections(const MatchResult& m,
                                       std::span<const CellClass> classes = kEvaluationClasses);

nlohmann::json to_json(const DetectionScorecard& card);
/// Columns: class,Precision,Recall,F1,LAMR,AP@0.5; last row "average".
std::string scorecard_csv(const DetectionScorecard& card);

// ---------------------------------------------------------------------------
// Confusion matrix

struct ConfusionMatrix {
  std::vector<CellClass> classes;
  /// counts[i][j]: class-i ground truths matched to class-j predictions.
  std::vector<std::vector<std::uint64_t>> counts;
  std::vector<std::uint64_t> gt_totals;
  /// Row-normalized counts; rows plus miss mass sum to 1.
  std::vector<std::vector<double>> rows;
  std::vector<double> miss;
};

/// Class-agnostic greedy localization matching (highest IoU >= threshold
/// among unmatched ground truths of any class) restricted to `classes`.
/// Rows with no ground truth are all zero. Throws kEmptyInput when there is
/// no ground truth at all.
ConfusionMatrix confusion_matrix(std::span<const Detection> preds,
                                 std::span<const AnnotationRecord> gts,
                                 double iou_threshold = 0.5,
                                 std::span<const CellClass> classes = kEvaluationClasses);

// ---------------------------------------------------------------------------
// Manual differential count comparison

struct NdcMse {
  std::array<double, kManualNdcClasses.size()> per_class{};
  double mean = 0.0;
};

/// Per-class mean over patients of (model - manual)^2 on proportions over
/// kManualNdcClasses. Each row must have exactly 10 entries and both inputs
/// the same number of patients; otherwise kDimensionMismatch.
NdcMse ndc_mse(std::span<const std::vector<double>> model_ndc,
               std::span<const std::vector<double>> manual_ndc);

/// Proportions over kManualNdcClasses from raw counts (empty -> all zero).
std::vector<double> manual_ndc_proportions(const std::array<std::uint64_t, kNumClasses>& counts);

}  // namespace marrow

#endif  // MARROW_EVAL_METRICS_HPP_
