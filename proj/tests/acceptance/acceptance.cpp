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

// Acceptance suite: one line per criterion, "PASS <name>: ..." or
// "FAIL <name>: ...". Run all criteria or a single one with --only.

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "marrow/annotation.hpp"
#include "marrow/cytology.hpp"
#include "marrow/dataset.hpp"
#include "marrow/detection.hpp"
#include "marrow/eval_metrics.hpp"
#include "marrow/geometry.hpp"
#include "marrow/synthetic.hpp"
#include "oracles.hpp"

namespace {

using namespace marrow;
using oracle::Q;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Context {
  std::string cli;  // path of the marrow executable
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

/// Collects the first few mismatches of a criterion.
class Failures {
 public:
  void add(const std::string& what) {
    if (count_++ < 3) first_ += (first_.empty() ? "" : "; ") + what;
  }
  bool any() const noexcept { return count_ > 0; }
  std::string summary() const { return std::to_string(count_) + " mismatches, e.g. " + first_; }

 private:
  std::size_t count_ = 0;
  std::string first_;
};

// ---------------------------------------------------------------------------

Outcome metric_oracles(const Context&) {
  const auto t0 = Clock::now();
  constexpr std::uint64_t kInstances = 250;
  Failures bad;
  std::size_t class_checks = 0;

  for (std::uint64_t seed = 1; seed <= kInstances; ++seed) {
    const auto inst = testing::random_detection_instance(seed);
    const MatchResult m = match_detections(inst.predictions, inst.ground_truth, 0.5);
    const oracle::Matching om = oracle::match(inst.predictions, inst.ground_truth, Q(1, 2));
    const std::string tag = "instance " + std::to_string(seed);

    if (m.predictions.size() != om.ranked.size() || m.images != om.images) {
      bad.add(tag + " shape");
      continue;
    }
    for (std::size_t i = 0; i < om.ranked.size(); ++i) {
      if (m.predictions[i].pred_index != om.ranked[i].index ||
          m.predictions[i].true_positive != om.ranked[i].true_positive) {
        bad.add(tag + " match at rank " + std::to_string(i));
        break;
      }
    }

    Q ap_sum(0);
    int evaluated = 0;
    for (CellClass c : kEvaluationClasses) {
      if (om.positives[index_of(c)] == 0) continue;
      ++class_checks;
      ++evaluated;
      const std::string ctag = tag + " " + std::string(class_name(c));
      const Q ap = oracle::ap11(om, c);
      ap_sum += ap;
      if (average_precision_11pt(m, c) != oracle::to_double(ap)) bad.add(ctag + " AP");
      const ClassPrf prf = precision_recall_f1(m, c);
      if (prf.precision != oracle::to_double(oracle::precision(om, c))) bad.add(ctag + " precision");
      if (prf.recall != oracle::to_double(oracle::recall(om, c))) bad.add(ctag + " recall");
      if (prf.f1 != oracle::to_double(oracle::f1(om, c))) bad.add(ctag + " F1");
      const double lamr = log_average_miss_rate(m, c);
      if (std::fabs(lamr - oracle::lamr(om, c)) > 1e-9) bad.add(ctag + " LAMR " + fmt(lamr));
    }
    const DetectionScorecard card = evaluate_detections(m);
    if (std::fabs(card.map - oracle::to_double(ap_sum / Q(evaluated))) > 1e-12) bad.add(tag + " mAP");

    const ConfusionMatrix cm = confusion_matrix(inst.predictions, inst.ground_truth, 0.5);
    const auto oc = oracle::confusion(inst.predictions, inst.ground_truth, Q(1, 2), kEvaluationClasses);
    if (cm.counts != oc.counts || cm.gt_totals != oc.totals) {
      bad.add(tag + " confusion counts");
    } else {
      for (std::size_t i = 0; i < cm.counts.size(); ++i) {
        if (oc.totals[i] == 0) continue;
        const auto total = static_cast<std::int64_t>(oc.totals[i]);
        std::int64_t matched = 0;
        for (std::size_t j = 0; j < cm.counts.size(); ++j) {
          const auto n = static_cast<std::int64_t>(oc.counts[i][j]);
          matched += n;
          if (cm.rows[i][j] != oracle::to_double(Q(n, total))) bad.add(tag + " confusion row");
        }
        if (cm.miss[i] != oracle::to_double(Q(total - matched, total))) bad.add(tag + " confusion miss");
      }
    }
  }

  double worst_auc = 0.0;
  for (std::uint64_t seed = 1; seed <= kInstances; ++seed) {
    const auto scores = testing::random_scores(seed * 7919);
    const double auc = roc_auc(scores).auc;
    const double err = std::fabs(auc - oracle::to_double(oracle::auc(scores)));
    worst_auc = std::max(worst_auc, err);
    if (err > 1e-9) bad.add("scores " + std::to_string(seed) + " AUC");
  }

  const double secs = seconds_since(t0);
  if (secs >= 60.0) bad.add("runtime " + fmt(secs) + " s");
  Outcome out;
  out.pass = !bad.any();
  out.detail = out.pass ? std::to_string(kInstances) + " detection instances (" + std::to_string(class_checks) +
                              " class evaluations) and " + std::to_string(kInstances) +
                              " score sets agree; worst AUC error " + fmt(worst_auc, 3) + "; " + fmt(secs, 3) +
                              " s"
                        : bad.summary();
  return out;
}

// ---------------------------------------------------------------------------

Outcome reference_detection_averages(const Context&) {
  // Per-class precision, recall, F1, LAMR and AP@0.5 of the reference
  // detector, in evaluation-class order.
  constexpr std::array<std::array<double, 5>, 16> kRows = {{
      {0.84, 0.91, 0.87, 0.21, 0.90},  // neutrophil
      {0.68, 0.79, 0.73, 0.37, 0.77},  // metamyelocyte
      {0.80, 0.82, 0.81, 0.34, 0.80},  // myelocyte
      {0.60, 0.67, 0.64, 0.53, 0.62},  // promyelocyte
      {0.87, 0.90, 0.88, 0.34, 0.84},  // blast
      {0.86, 0.92, 0.89, 0.17, 0.92},  // erythroblast
      {0.80, 0.57, 0.67, 0.18, 0.60},  // megakaryocyte nucleus
      {0.73, 0.65, 0.69, 0.49, 0.66},  // lymphocyte
      {0.84, 0.71, 0.77, 0.36, 0.72},  // monocyte
      {0.75, 0.69, 0.72, 0.33, 0.72},  // plasma cell
      {0.93, 0.94, 0.93, 0.06, 0.97},  // eosinophil
      {1.00, 0.79, 0.88, 0.19, 0.82},  // megakaryocyte
      {0.85, 0.80, 0.82, 0.34, 0.79},  // debris
      {0.90, 0.53, 0.67, 0.50, 0.54},  // histiocyte
      {0.84, 0.64, 0.73, 0.33, 0.64},  // platelet
      {0.93, 0.61, 0.73, 0.41, 0.62},  // platelet clump
  }};
  std::vector<ClassScore> rows;
  for (std::size_t i = 0; i < kRows.size(); ++i) {
    const auto& r = kRows[i];
    rows.push_back({kEvaluationClasses[i], r[0], r[1], r[2], r[3], r[4]});
  }
  const DetectionScorecard card = map_and_f1(rows);

  struct Check {
    const char* name;
    double got;
    double expected;
  };
  const std::array<Check, 5> checks = {{{"mAP", card.map, 0.75},
                                        {"F1", card.mean_f1, 0.78},
                                        {"precision", card.mean_precision, 0.83},
                                        {"recall", card.mean_recall, 0.75},
                                        {"LAMR", card.mean_lamr, 0.31}}};
  Outcome out;
  std::string failed;
  for (const auto& c : checks) {
    const bool ok = std::fabs(c.got - c.expected) <= 0.005 + 1e-12;
    out.detail += std::string(out.detail.empty() ? "" : ", ") + c.name + " " + fmt(c.got) +
                  (ok ? " ok" : " (expected " + fmt(c.expected) + " +/- 0.005)");
    if (!ok) {
      out.pass = false;
      failed += std::string(failed.empty() ? "" : ", ") + c.name;
    }
  }
  if (!out.pass) out.detail = "out of tolerance: " + failed + "; " + out.detail;
  return out;
}

// ---------------------------------------------------------------------------

Outcome reference_roi_metrics(const Context&) {
  // Five cross-validation folds consistent with the reference averages.
  std::vector<BinaryConfusion> folds;
  folds.push_back({.tp = 123, .fp = 130, .tn = 1747, .fn = 0});
  for (int i = 0; i < 4; ++i) folds.push_back({.tp = 85, .fp = 0, .tn = 1882, .fn = 33});
  const BinaryMetrics m = average_binary_metrics(folds);

  struct Check {
    const char* name;
    std::optional<double> got;
    double expected;
  };
  const std::array<Check, 5> checks = {{{"accuracy", m.accuracy, 0.97},
                                        {"precision", m.precision, 0.90},
                                        {"specificity", m.specificity, 0.99},
                                        {"recall", m.recall, 0.78},
                                        {"npv", m.npv, 0.99}}};
  Outcome out;
  for (const auto& c : checks) {
    const bool ok = c.got && std::fabs(*c.got - c.expected) <= 0.005;
    out.pass = out.pass && ok;
    out.detail += std::string(out.detail.empty() ? "" : ", ") + c.name + " " +
                  (c.got ? fmt(*c.got, 4) : std::string("undefined")) + (ok ? "" : " (expected " + fmt(c.expected) + ")");
  }
  return out;
}

// ---------------------------------------------------------------------------

ClassCounts counts_of(std::initializer_list<std::pair<CellClass, std::uint64_t>> items) {
  ClassCounts c{};
  for (const auto& [cls, n] : items) c[index_of(cls)] = n;
  return c;
}

Outcome convergence_formulas(const Context&) {
  using C = CellClass;
  Failures bad;
  std::size_t fixtures = 0;

  // Hand-computed chi-square distances on explicit vectors.
  struct VectorFixture {
    std::vector<double> x;
    std::vector<double> y;
    Q expected;
  };
  const std::vector<VectorFixture> vectors = {
      {{0.5, 0.5}, {0.25, 0.75}, Q(1, 15)},
      {{0.25, 0.75}, {0.25, 0.75}, Q(0)},
      {{1.0, 0.0}, {0.0, 1.0}, Q(1)},
      {{0.5, 0.25, 0.25, 0.0}, {0.25, 0.25, 0.25, 0.25}, Q(1, 6)},
      {{0.0, 0.0}, {0.0, 0.0}, Q(0)},
      {{0.375, 0.625}, {0.125, 0.875}, Q(1, 12)},
      {{3.0, 1.0}, {1.0, 1.0}, Q(1, 2)},
  };
  for (const auto& f : vectors) {
    ++fixtures;
    const double got = chi_square_distance(f.x, f.y);
    if (got != oracle::to_double(f.expected)) bad.add("vector fixture " + std::to_string(fixtures) + " gave " + fmt(got, 17));
  }

  // Convergence vectors from counts with power-of-two subtotals.
  struct CountFixture {
    ClassCounts a;
    ClassCounts b;
    Q expected;
  };
  const std::vector<CountFixture> count_fixtures = {
      // proportions 1/2,1/2 vs 1/4,1/4,1/2; both ratios 1
      {counts_of({{C::kNeutrophil, 8}, {C::kErythroblast, 8}}),
       counts_of({{C::kNeutrophil, 4}, {C::kBlast, 4}, {C::kErythroblast, 8}}), Q(1, 6)},
      // ratio 3 vs 1 adds (3-1)^2/4
      {counts_of({{C::kNeutrophil, 12}, {C::kErythroblast, 4}}),
       counts_of({{C::kNeutrophil, 8}, {C::kErythroblast, 8}}), Q(17, 30)},
      // undefined ratio enters as 0
      {counts_of({{C::kNeutrophil, 16}}), counts_of({{C::kNeutrophil, 8}, {C::kErythroblast, 8}}), Q(5, 6)},
      // auxiliary classes do not enter the vector
      {counts_of({{C::kNeutrophil, 8}, {C::kErythroblast, 8}, {C::kDebris, 100}, {C::kPlatelet, 7}}),
       counts_of({{C::kNeutrophil, 8}, {C::kErythroblast, 8}}), Q(0)},
  };
  for (const auto& f : count_fixtures) {
    ++fixtures;
    const double got = chi_square_distance(convergence_vector(f.a), convergence_vector(f.b));
    if (got != oracle::to_double(f.expected)) bad.add("count fixture " + std::to_string(fixtures) + " gave " + fmt(got, 17));
  }

  // Myeloid-to-erythroid ratios.
  struct RatioFixture {
    ClassCounts counts;
    std::optional<Q> expected;
  };
  const std::vector<RatioFixture> ratios = {
      {counts_of({{C::kBlast, 3}, {C::kPromyelocyte, 2}, {C::kMyelocyte, 1}, {C::kMetamyelocyte, 1},
                  {C::kNeutrophil, 5}, {C::kEosinophil, 1}, {C::kLymphocyte, 10}, {C::kErythroblast, 4}}),
       Q(13, 4)},
      {counts_of({{C::kNeutrophil, 1}, {C::kErythroblast, 3}}), Q(1, 3)},
      {counts_of({{C::kNeutrophil, 7}}), std::nullopt},
      {counts_of({{C::kErythroblast, 5}, {C::kBasophil, 9}, {C::kMonocyte, 2}}), Q(0)},
      {counts_of({{C::kMyelocyte, 200}, {C::kErythroblast, 7}}), Q(200, 7)},
  };
  for (const auto& f : ratios) {
    ++fixtures;
    const auto got = bm_me_ratio(f.counts);
    const bool ok = f.expected ? (got && *got == oracle::to_double(*f.expected)) : !got.has_value();
    if (!ok) bad.add("ratio fixture " + std::to_string(fixtures));
  }

  // Random vectors on the 1/16 lattice against the rational oracle.
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 200; ++k) {
    ++fixtures;
    std::vector<double> x(13), y(13);
    std::vector<Q> qx, qy;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::uniform_int_distribution<int>(0, 16)(rng) / 16.0;
      y[i] = std::uniform_int_distribution<int>(0, 16)(rng) / 16.0;
      qx.push_back(oracle::dyadic(x[i]));
      qy.push_back(oracle::dyadic(y[i]));
    }
    if (chi_square_distance(x, y) != oracle::to_double(oracle::chi_square(qx, qy))) {
      bad.add("random fixture " + std::to_string(k));
    }
  }

  Outcome out;
  out.pass = !bad.any();
  out.detail = out.pass ? std::to_string(fixtures) + " fixtures match exactly" : bad.summary();
  return out;
}

// ---------------------------------------------------------------------------

Outcome convergence_calibration(const Context&) {
  const auto t0 = Clock::now();
  constexpr int kRuns = 50;
  constexpr std::size_t kMaxTiles = 2000;
  std::vector<std::size_t> tiles;
  int in_band = 0;
  for (int run = 0; run < kRuns; ++run) {
    SamplingDetector detector(synthetic::reference_class_counts(), synthetic::kReferenceObjectsPerTile,
                              static_cast<std::uint64_t>(run) + 1);
    Ihct ihct;  // default threshold and patience
    Tile tile;
    tile.slide_id = "calibration";
    tile.pixels = RgbImage(1, 1);
    std::size_t i = 0;
    while (!ihct.converged && i < kMaxTiles) {
      tile.coord = GridCoord{static_cast<int>(i / 100), static_cast<int>(i % 100)};
      const auto dets = diou_nms(detect_raw(detector, tile));
      accumulate_into(ihct, hct_from_detections(dets));
      ++i;
    }
    const std::size_t seen = ihct.converged ? ihct.tiles_seen : kMaxTiles + 1;
    tiles.push_back(seen);
    if (seen >= 300 && seen <= 600) ++in_band;
  }
  std::sort(tiles.begin(), tiles.end());
  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = in_band * 10 >= kRuns * 9 && secs < 300.0;
  out.detail = std::to_string(in_band) + "/" + std::to_string(kRuns) + " runs converged within 300-600 tiles (min " +
               std::to_string(tiles.front()) + ", median " + std::to_string(tiles[tiles.size() / 2]) + ", max " +
               std::to_string(tiles.back()) + "); " + fmt(secs, 3) + " s";
  return out;
}

// ---------------------------------------------------------------------------

Outcome nms_geometry_properties(const Context&) {
  Failures bad;
  const NmsParams params;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const auto raw = testing::random_raw_detections(seed);
    const auto kept = diou_nms(raw, params);
    const std::string tag = "tile " + std::to_string(seed);
    if (diou_nms(kept, params) != kept) bad.add(tag + " not idempotent");
    for (const auto& d : kept) {
      if (std::find(raw.begin(), raw.end(), d) == raw.end()) bad.add(tag + " output not in input");
      if (d.confidence < params.conf_thresh) bad.add(tag + " low-confidence box kept");
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (i > 0 && ranks_before(kept[i], kept[i - 1])) bad.add(tag + " output not ranked");
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        if (kept[i].cls == kept[j].cls && diou(kept[i].bbox, kept[j].bbox) > params.nms_iou) {
          bad.add(tag + " kept pair above overlap bound");
        }
      }
    }
    // Every suppressed box is explained by a kept box of its class.
    for (const auto& d : raw) {
      if (d.confidence < params.conf_thresh || std::find(kept.begin(), kept.end(), d) != kept.end()) continue;
      const bool covered = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
        return k.cls == d.cls && diou(k.bbox, d.bbox) > params.nms_iou;
      });
      if (!covered) bad.add(tag + " box dropped without a suppressor");
    }
  }

  std::mt19937_64 rng(99);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const BBox a = testing::lattice_box(rng, 2, 64);
    const BBox b = testing::lattice_box(rng, 2, 64);
    const double ab = iou(a, b);
    if (ab != iou(b, a)) bad.add("iou asymmetric");
    if (!(ab >= 0.0 && ab <= 1.0)) bad.add("iou out of [0,1]");
    if (iou(a, a) != 1.0) bad.add("self iou not 1");
    const double d = diou(a, b);
    if (!(d > -1.0 && d <= 1.0) || d > ab) bad.add("diou out of range");
    worst = std::max(worst, std::fabs(ab - oracle::to_double(oracle::iou(a, b))));
  }
  if (worst > 1e-12) bad.add("iou differs from exact value by " + fmt(worst, 3));

  Outcome out;
  out.pass = !bad.any();
  out.detail = out.pass ? "1000 tiles: idempotent, subset, ranked, overlap-bounded; 10000 pairs: iou symmetric, "
                          "bounded, max error " + fmt(worst, 3)
                        : bad.summary();
  return out;
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const Context& ctx, const std::string& args) {
  const std::string cmd = "\"" + ctx.cli + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Outcome process_determinism(const Context& ctx) {
  if (ctx.cli.empty()) return {false, "no --cli executable given"};
  testing::TempDir dir("marrow-determinism");
  const auto config = dir / "sampling.json";
  std::ofstream(config) << R"({"detector": {"backend": {"kind": "sampling"}}, "seeds": {"order": 11, "detector": 5}})";

  struct Case {
    std::string name;
    std::string synth_args;
    std::string slide;
    std::string config;
  };
  const std::vector<Case> suite = {
      {"seed1-manifest", "--seed 1 --slide-id s1", (dir / "s1").string(), ""},
      {"seed2-manifest", "--seed 2 --slide-id s2 --roi-fraction 0.3", (dir / "s2").string(), ""},
      {"seed3-tiff", "--seed 3 --slide-id s3 --format tiff", (dir / "s3.tiff").string(), ""},
      {"seed4-sampling", "--seed 4 --slide-id s4", (dir / "s4").string(), config.string()},
  };
  Outcome out;
  std::size_t bytes = 0;
  for (const auto& c : suite) {
    if (run_cli(ctx, "synth-slide --out \"" + c.slide + "\" " + c.synth_args) != 0) {
      return {false, c.name + ": synth-slide failed"};
    }
    std::array<std::string, 2> reports;
    for (int k = 0; k < 2; ++k) {
      const auto report = dir / (c.name + "-" + std::to_string(k) + ".json");
      const auto decisions = dir / (c.name + "-" + std::to_string(k) + ".jsonl");
      std::string args = "process --slide \"" + c.slide + "\" --out \"" + report.string() + "\" --decisions \"" +
                         decisions.string() + "\"";
      if (!c.config.empty()) args += " --config \"" + c.config + "\"";
      if (run_cli(ctx, args) != 0) return {false, c.name + ": process run " + std::to_string(k) + " failed"};
      reports[static_cast<std::size_t>(k)] = slurp(report) + slurp(decisions);
    }
    if (reports[0].empty() || reports[0] != reports[1]) {
      out.pass = false;
      out.detail += c.name + " differs; ";
    }
    bytes += reports[0].size();
  }
  if (out.pass) out.detail = std::to_string(suite.size()) + " slides, paired reports byte-identical (" +
                             std::to_string(bytes) + " bytes each run)";
  return out;
}

// ---------------------------------------------------------------------------

Outcome oversampling_factors(const Context&) {
  Failures bad;
  // Tile categories.
  const std::map<std::string, std::uint64_t> tiles = {{"roi", 4750}, {"non_roi", 70250}};
  const OversamplePlan tile_plan = oversample_plan(tiles, {{"roi", 28500}, {"non_roi", 70250}}, 7);
  const OversampleEntry* roi = tile_plan.find("roi");
  if (!roi || roi->planned_total() != 28500 || roi->base != 6 || !roi->extra_units.empty()) {
    bad.add("roi 4750 -> 28500");
  }
  if (tile_plan.find("non_roi") != nullptr) bad.add("non_roi should stay unchanged");

  // Object classes.
  const std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> classes = {
      {"neutrophil", {2714, 119416}},   {"metamyelocyte", {1017, 44748}},
      {"myelocyte", {1199, 52756}},     {"promyelocyte", {409, 17996}},
      {"blast", {3950, 173800}},        {"erythroblast", {2668, 117392}},
      {"megakaryocyte_nucleus", {23, 1012}}, {"lymphocyte", {1305, 57420}},
      {"monocyte", {569, 25036}},       {"plasma_cell", {176, 7744}},
      {"eosinophil", {249, 10956}},     {"basophil", {7, 308}},
      {"megakaryocyte", {106, 4664}},   {"debris", {5603, 246532}},
      {"histiocyte", {191, 8404}},      {"mast_cell", {33, 1452}},
      {"platelet", {3971, 174724}},     {"platelet_clump", {585, 25740}},
      {"other_cell", {2007, 88308}},
  };
  std::map<std::string, std::uint64_t> counts, targets;
  for (const auto& [name, ct] : classes) {
    counts[name] = ct.first;
    targets[name] = ct.second;
  }
  const OversamplePlan plan = oversample_plan(counts, targets, 7);
  std::uint64_t before = 0, after = 0;
  for (const auto& [name, ct] : classes) {
    const OversampleEntry* e = plan.find(name);
    before += ct.first;
    after += e ? e->planned_total() : 0;
    if (!e || e->planned_total() != ct.second || e->base != 44 || !e->extra_units.empty()) bad.add(name);
  }
  if (before != 26782 || after != 1178408) bad.add("class totals " + std::to_string(after));
  if (targets_from_factor(counts, 44) != targets) bad.add("factor 44 targets");

  Outcome out;
  out.pass = !bad.any();
  out.detail = out.pass ? "tiles 4750->28500 (x6), 70250 unchanged; 19 classes x44 (2714->119416, 7->308), "
                          "26782->1178408 objects"
                        : bad.summary();
  return out;
}

// ---------------------------------------------------------------------------

Outcome format_round_trips(const Context&) {
  Failures bad;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const std::string tag = "record " + std::to_string(seed);

    // yolo-txt: arbitrary coordinates round-trip through the shortest
    // decimal form. Its confidence column is the only provenance it carries.
    AnnotationRecord any = testing::random_record(seed, false);
    for (auto& b : any.boxes) {
      if (b.source == BoxSource::kModelConfirmed) b.source = BoxSource::kHuman;
    }
    const std::string yolo = write_yolo(any.boxes);
    const auto parsed = parse_yolo(yolo);
    if (parsed != any.boxes) bad.add(tag + " yolo parse(write)");
    if (write_yolo(parsed) != yolo) bad.add(tag + " yolo write(parse)");

    // voc-xml: exact on lattice boxes with power-of-two image sizes.
    const AnnotationRecord exact = testing::random_record(seed + 100000, true);
    const std::string xml = write_voc(exact);
    const AnnotationRecord back = parse_voc(xml);
    if (back != exact) bad.add(tag + " voc parse(write)");
    if (write_voc(back) != xml) bad.add(tag + " voc write(parse)");
  }
  Outcome out;
  out.pass = !bad.any();
  out.detail = out.pass ? "1000 yolo-txt and 1000 voc-xml records are fixed points of parse/write" : bad.summary();
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<std::pair<std::string, std::function<Outcome(const Context&)>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome(const Context&)>>> all = {
      {"metric_oracles", metric_oracles},
      {"reference_detection_averages", reference_detection_averages},
      {"reference_roi_metrics", reference_roi_metrics},
      {"convergence_formulas", convergence_formulas},
      {"convergence_calibration", convergence_calibration},
      {"nms_geometry_properties", nms_geometry_properties},
      {"process_determinism", process_determinism},
      {"oversampling_factors", oversampling_factors},
      {"format_round_trips", format_round_trips},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = argv[++i];
    } else if (arg == "--cli" && i + 1 < argc) {
      ctx.cli = argv[++i];
    } else if (arg == "--list") {
      for (const auto& [name, fn] : criteria()) std::cout << name << "\n";
      return 0;
    } else {
      std::cerr << "usage: marrow_acceptance [--only NAME] [--cli PATH] [--list]\n";
      return 2;
    }
  }

  int failures = 0;
  bool ran = false;
  for (const auto& [name, fn] : criteria()) {
    if (!only.empty() && name != only) continue;
    ran = true;
    Outcome o;
    try {
      o = fn(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failures;
  }
  if (!ran) {
    std::cerr << "unknown criterion " << only << "\n";
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
