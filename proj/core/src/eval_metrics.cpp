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

#include "marrow/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>


#include "exact.hpp"
#include "marrow/error.hpp"

namespace marrow {
namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

using detail::BigInt;
using detail::rounded_quotient;

std::string record_key(const AnnotationRecord& rec) { return rec.tile.key(); }

bool contains(std::span<const CellClass> classes, CellClass c) {
  return std::find(classes.begin(), classes.end(), c) != classes.end();
}

std::uint64_t positives_of(const MatchResult& m, CellClass cls) {
  return static_cast<std::uint64_t>(std::count_if(
      m.ground_truths.begin(), m.ground_truths.end(),
      [&](const GroundTruthMatch& g) { return g.cls == cls; }));
}

void require_ground_truth(std::uint64_t positives, CellClass cls) {
  if (positives == 0) {
    fail(ErrorCode::kNoGroundTruth,
         "no ground truth of class " + std::string(class_name(cls)));
  }
}

// Stable rank order over an index set of detections.
std::vector<std::size_t> rank_order(std::span<const Detection> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranks_before(preds[a], preds[b]);
  });
  return order;
}

double mean_of(std::span<const ClassScore> rows, double ClassScore::*field) {
  double sum = 0.0;
  for (const auto& r : rows) sum += r.*field;
  return sum / static_cast<double>(rows.size());
}

}  // namespace

BinaryMetrics binary_metrics(const BinaryConfusion& c) {
  if (c.total() == 0) fail(ErrorCode::kEmptyConfusion, "confusion has no samples");
  BinaryMetrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  m.npv = ratio(c.tn, c.tn + c.fn);
  return m;
}

BinaryMetrics average_binary_metrics(std::span<const BinaryConfusion> folds) {
  if (folds.empty()) fail(ErrorCode::kEmptyInput, "no folds to average");
  std::array<double, 5> sum{};
  std::array<std::size_t, 5> n{};
  for (const auto& fold : folds) {
    const BinaryMetrics m = binary_metrics(fold);
    const std::array<std::optional<double>, 5> v{m.accuracy, m.precision, m.recall,
                                                  m.specificity, m.npv};
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i]) {
        sum[i] += *v[i];
        ++n[i];
      }
    }
  }
  auto avg = [&](std::size_t i) -> std::optional<double> {
    if (n[i] == 0) return std::nullopt;
    return sum[i] / static_cast<double>(n[i]);
  };
  return {avg(0), avg(1), avg(2), avg(3), avg(4)};
}

BinaryConfusion confusion_at_threshold(std::span<const ScoredLabel> scored, double threshold) {
  BinaryConfusion c;
  for (const auto& s : scored) {
    const bool predicted = s.score >= threshold;
    if (predicted && s.positive) ++c.tp;
    else if (predicted) ++c.fp;
    else if (s.positive) ++c.fn;
    else ++c.tn;
  }
  return c;
}

RocCurve roc_auc(std::span<const ScoredLabel> scored) {
  const auto pos = static_cast<std::uint64_t>(
      std::count_if(scored.begin(), scored.end(), [](const ScoredLabel& s) { return s.positive; }));
  const std::uint64_t neg = scored.size() - pos;
  if (pos == 0 || neg == 0) {
    fail(ErrorCode::kSingleClassInput, "ROC needs both positive and negative samples");
  }
  std::vector<ScoredLabel> sorted(scored.begin(), scored.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].score;
    for (; i < sorted.size() && sorted[i].score == t; ++i) {
      if (sorted[i].positive) ++tp;
      else ++fp;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos), t});
  }
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    curve.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return curve;
}

RocCurve mean_roc(std::span<const RocCurve> folds, std::size_t grid_points) {
  if (folds.empty()) fail(ErrorCode::kEmptyInput, "no ROC curves to average");
  if (grid_points < 2) fail(ErrorCode::kInvalidConfig, "ROC grid needs at least 2 points");
  RocCurve mean;
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double x = static_cast<double>(g) / static_cast<double>(grid_points - 1);
    double tpr_sum = 0.0;
    for (const auto& curve : folds) {
      const auto& pts = curve.points;
      if (pts.empty()) fail(ErrorCode::kEmptyInput, "empty ROC curve");
      // Last point at or left of x; on a vertical run that is its top.
      auto right = std::upper_bound(pts.begin(), pts.end(), x,
                                    [](double v, const RocPoint& p) { return v < p.fpr; });
      if (right == pts.begin()) {
        tpr_sum += pts.front().tpr;
        continue;
      }
      const RocPoint& a = *(right - 1);
      if (right == pts.end() || a.fpr == x) {
        tpr_sum += a.tpr;
        continue;
      }
      const RocPoint& b = *right;
      tpr_sum += a.tpr + (b.tpr - a.tpr) * (x - a.fpr) / (b.fpr - a.fpr);
    }
    mean.points.push_back({x, tpr_sum / static_cast<double>(folds.size()), 0.0});
  }
  for (std::size_t i = 1; i < mean.points.size(); ++i) {
    const auto& a = mean.points[i - 1];
    const auto& b = mean.points[i];
    mean.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return mean;
}

std::string image_key(const Detection& d) {
  TileRef ref;
  ref.slide_id = d.slide_id;
  ref.coord = d.tile_coord;
  return ref.key();
}

MatchResult match_detections(std::span<const Detection> preds,
                             std::span<const AnnotationRecord> gts, double iou_threshold) {
  MatchResult m;
  m.iou_threshold = iou_threshold;
  std::map<std::string, std::vector<std::size_t>> gt_by_image;
  std::set<std::string> images;
  for (const auto& rec : gts) {
    const std::string key = record_key(rec);
    images.insert(key);
    auto& bucket = gt_by_image[key];
    for (const auto& box : rec.boxes) {
      bucket.push_back(m.ground_truths.size());
      m.ground_truths.push_back({key, box.bbox, box.cls, std::nullopt});
    }
  }

  for (std::size_t idx : rank_order(preds)) {
    const Detection& d = preds[idx];
    PredictionMatch pm;
    pm.pred_index = idx;
    pm.image_key = image_key(d);
    pm.cls = d.cls;
    pm.confidence = d.confidence;
    images.insert(pm.image_key);

    double best = -1.0;
    std::optional<std::size_t> best_gt;
    if (auto it = gt_by_image.find(pm.image_key); it != gt_by_image.end()) {
      for (std::size_t g : it->second) {
        auto& gt = m.ground_truths[g];
        if (gt.cls != d.cls || gt.pred_index) continue;
        const double v = iou(d.bbox, gt.bbox);
        if (v >= iou_threshold && v > best) {
          best = v;
          best_gt = g;
        }
      }
    }
    if (best_gt) {
      pm.true_positive = true;
      pm.gt_index = best_gt;
      m.ground_truths[*best_gt].pred_index = idx;
    }
    m.predictions.push_back(std::move(pm));
  }
  m.images = images.size();
  return m;
}

PrCurve pr_curve(const MatchResult& m, CellClass cls) {
  PrCurve curve;
  curve.positives = positives_of(m, cls);
  PrPoint acc;
  for (const auto& p : m.predictions) {
    if (p.cls != cls) continue;
    if (p.true_positive) ++acc.tp;
    else ++acc.fp;
    curve.points.push_back(acc);
  }
  return curve;
}

double average_precision_11pt(const MatchResult& m, CellClass cls) {
  const PrCurve curve = pr_curve(m, cls);
  require_ground_truth(curve.positives, cls);
  // Interpolated precisions are summed as exact fractions and rounded once.
  BigInt sum_num = 0;
  BigInt sum_den = 1;
  for (std::uint64_t level = 0; level <= 10; ++level) {
    const PrPoint* best = nullptr;
    for (const auto& p : curve.points) {
      if (p.tp * 10 < level * curve.positives) continue;  // recall below level/10
      if (best == nullptr || BigInt(p.tp) * (best->tp + best->fp) > BigInt(best->tp) * (p.tp + p.fp)) {
        best = &p;
      }
    }
    if (best == nullptr || best->tp == 0) continue;
    const std::uint64_t den = best->tp + best->fp;
    sum_num = sum_num * den + BigInt(best->tp) * sum_den;
    sum_den *= den;
    const BigInt g = boost::multiprecision::gcd(sum_num, sum_den);
    sum_num /= g;
    sum_den /= g;
  }
  return rounded_quotient(sum_num, sum_den * 11);
}

ClassPrf precision_recall_f1(const MatchResult& m, CellClass cls) {
  ClassPrf r;
  r.positives = positives_of(m, cls);
  require_ground_truth(r.positives, cls);
  for (const auto& p : m.predictions) {
    if (p.cls != cls) continue;
    if (p.true_positive) ++r.tp;
    else ++r.fp;
  }
  r.precision = ratio(r.tp, r.tp + r.fp).value_or(0.0);
  r.recall = static_cast<double>(r.tp) / static_cast<double>(r.positives);
  // 2PR / (P + R) reduces to 2tp / (2tp + fp + fn), a single rounding.
  if (r.tp > 0) r.f1 = static_cast<double>(2 * r.tp) / static_cast<double>(r.tp + r.fp + r.positives);
  return r;
}

double log_average_miss_rate(const MatchResult& m, CellClass cls,
                             std::optional<std::size_t> images, const LamrOptions& options) {
  const std::uint64_t positives = positives_of(m, cls);
  require_ground_truth(positives, cls);
  const std::size_t n_images = images.value_or(m.images);
  if (n_images == 0) fail(ErrorCode::kEmptyInput, "LAMR needs at least one image");
  if (options.samples < 1 || !(options.fppi_min > 0.0) || options.fppi_max < options.fppi_min) {
    fail(ErrorCode::kInvalidConfig, "invalid LAMR sampling grid");
  }

  // Operating points of the threshold sweep: nothing kept, then every
  // distinct confidence with all predictions at or above it.
  struct Op {
    double fppi;
    double miss;
  };
  std::vector<Op> ops{{0.0, 1.0}};
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::vector<const PredictionMatch*> ranked;
  for (const auto& p : m.predictions) {
    if (p.cls == cls) ranked.push_back(&p);
  }
  for (std::size_t i = 0; i < ranked.size();) {
    const double c = ranked[i]->confidence;
    for (; i < ranked.size() && ranked[i]->confidence == c; ++i) {
      if (ranked[i]->true_positive) ++tp;
      else ++fp;
    }
    ops.push_back({static_cast<double>(fp) / static_cast<double>(n_images),
                   1.0 - static_cast<double>(tp) / static_cast<double>(positives)});
  }

  const double lo = std::log10(options.fppi_min);
  const double hi = std::log10(options.fppi_max);
  double log_sum = 0.0;
  for (std::size_t k = 0; k < options.samples; ++k) {
    const double t = options.samples == 1 ? 0.0
                                          : static_cast<double>(k) /
                                                static_cast<double>(options.samples - 1);
    const double f = std::pow(10.0, lo + (hi - lo) * t);
    double best = 1.0;
    for (const auto& op : ops) {
      if (op.fppi <= f) best = std::min(best, op.miss);
    }
    log_sum += std::log(std::max(best, options.miss_floor));
  }
  return std::exp(log_sum / static_cast<double>(options.samples));
}

DetectionScorecard map_and_f1(std::span<const ClassScore> rows) {
  if (rows.empty()) fail(ErrorCode::kEmptyInput, "no evaluated classes");
  DetectionScorecard card;
  card.classes.assign(rows.begin(), rows.end());
  card.map = mean_of(rows, &ClassScore::ap);
  card.mean_precision = mean_of(rows, &ClassScore::precision);
  card.mean_recall = mean_of(rows, &ClassScore::recall);
  card.mean_f1 = mean_of(rows, &ClassScore::f1);
  card.mean_lamr = mean_of(rows, &ClassScore::lamr);
  return card;
}

DetectionScorecard evaluate_detections(const MatchResult& m, std::span<const CellClass> classes) {
  std::vector<ClassScore> rows;
  for (CellClass c : classes) {
    if (positives_of(m, c) == 0) continue;
    const ClassPrf prf = precision_recall_f1(m, c);
    rows.push_back({c, prf.precision, prf.recall, prf.f1, log_average_miss_rate(m, c),
                    average_precision_11pt(m, c)});
  }
  return map_and_f1(rows);
}

nlohmann::json to_json(const DetectionScorecard& card) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& r : card.classes) {
    classes.push_back({{"class", class_name(r.cls)},
                       {"precision", r.precision},
                       {"recall", r.recall},
                       {"f1", r.f1},
                       {"lamr", r.lamr},
                       {"ap", r.ap}});
  }
  return {{"classes", std::move(classes)},
          {"average",
           {{"precision", card.mean_precision},
            {"recall", card.mean_recall},
            {"f1", card.mean_f1},
            {"lamr", card.mean_lamr},
            {"map", card.map}}}};
}

std::string scorecard_csv(const DetectionScorecard& card) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "class,Precision,Recall,F1,LAMR,AP@0.5\n";
  for (const auto& r : card.classes) {
    out << class_name(r.cls) << ',' << r.precision << ',' << r.recall << ',' << r.f1 << ','
        << r.lamr << ',' << r.ap << '\n';
  }
  out << "average," << card.mean_precision << ',' << card.mean_recall << ',' << card.mean_f1
      << ',' << card.mean_lamr << ',' << card.map << '\n';
  return out.str();
}

ConfusionMatrix confusion_matrix(std::span<const Detection> preds,
                                 std::span<const AnnotationRecord> gts, double iou_threshold,
                                 std::span<const CellClass> classes) {
  ConfusionMatrix cm;
  cm.classes.assign(classes.begin(), classes.end());
  const std::size_t k = classes.size();
  auto slot = [&](CellClass c) {
    return static_cast<std::size_t>(std::find(classes.begin(), classes.end(), c) -
                                    classes.begin());
  };
  cm.counts.assign(k, std::vector<std::uint64_t>(k, 0));
  cm.gt_totals.assign(k, 0);

  struct Gt {
    BBox bbox;
    CellClass cls;
    bool taken = false;
  };
  std::map<std::string, std::vector<Gt>> by_image;
  std::uint64_t total = 0;
  for (const auto& rec : gts) {
    auto& bucket = by_image[record_key(rec)];
    for (const auto& box : rec.boxes) {
      if (!contains(classes, box.cls)) continue;
      bucket.push_back({box.bbox, box.cls});
      ++cm.gt_totals[slot(box.cls)];
      ++total;
    }
  }
  if (total == 0) fail(ErrorCode::kEmptyInput, "confusion matrix needs ground truth");

  for (std::size_t idx : rank_order(preds)) {
    const Detection& d = preds[idx];
    if (!contains(classes, d.cls)) continue;
    auto it = by_image.find(image_key(d));
    if (it == by_image.end()) continue;
    double best = -1.0;
    Gt* best_gt = nullptr;
    for (auto& gt : it->second) {
      if (gt.taken) continue;
      const double v = iou(d.bbox, gt.bbox);
      if (v >= iou_threshold && v > best) {
        best = v;
        best_gt = &gt;
      }
    }
    if (best_gt) {
      best_gt->taken = true;
      ++cm.counts[slot(best_gt->cls)][slot(d.cls)];
    }
  }

  cm.rows.assign(k, std::vector<double>(k, 0.0));
  cm.miss.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (cm.gt_totals[i] == 0) continue;
    const auto n = static_cast<double>(cm.gt_totals[i]);
    std::uint64_t matched = 0;
    for (std::size_t j = 0; j < k; ++j) {
      cm.rows[i][j] = static_cast<double>(cm.counts[i][j]) / n;
      matched += cm.counts[i][j];
    }
    cm.miss[i] = static_cast<double>(cm.gt_totals[i] - matched) / n;
  }
  return cm;
}

NdcMse ndc_mse(std::span<const std::vector<double>> model_ndc,
               std::span<const std::vector<double>> manual_ndc) {
  constexpr std::size_t kWidth = kManualNdcClasses.size();
  if (model_ndc.size() != manual_ndc.size() || model_ndc.empty()) {
    fail(ErrorCode::kDimensionMismatch, "model and manual NDC patient counts differ");
  }
  NdcMse out;
  for (std::size_t p = 0; p < model_ndc.size(); ++p) {
    if (model_ndc[p].size() != kWidth || manual_ndc[p].size() != kWidth) {
      fail(ErrorCode::kDimensionMismatch, "NDC rows must cover the 10 manual-count classes");
    }
    for (std::size_t i = 0; i < kWidth; ++i) {
      const double d = model_ndc[p][i] - manual_ndc[p][i];
      out.per_class[i] += d * d;
    }
  }
  const auto n = static_cast<double>(model_ndc.size());
  for (double& v : out.per_class) v /= n;
  out.mean = std::accumulate(out.per_class.begin(), out.per_class.end(), 0.0) /
             static_cast<double>(kWidth);
  return out;
}

std::vector<double> manual_ndc_proportions(const std::array<std::uint64_t, kNumClasses>& counts) {
  std::uint64_t total = 0;
  for (CellClass c : kManualNdcClasses) total += counts[index_of(c)];
  std::vector<double> out(kManualNdcClasses.size(), 0.0);
  if (total == 0) return out;
  for (std::size_t i = 0; i < kManualNdcClasses.size(); ++i) {
    out[i] = static_cast<double>(counts[index_of(kManualNdcClasses[i])]) /
             static_cast<double>(total);
  }
  return out;
}

}  // namespace marrow
