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

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

namespace marrow::oracle {
namespace {

std::string image_of(const Detection& d) {
  return d.slide_id + "__r" + std::to_string(d.tile_coord.row) + "_c" + std::to_string(d.tile_coord.col);
}

struct Gt {
  std::string image;
  BBox box;
  CellClass cls;
  bool taken = false;
};

std::vector<Gt> flatten(std::span<const AnnotationRecord> gts) {
  std::vector<Gt> out;
  for (const auto& rec : gts) {
    for (const auto& b : rec.boxes) out.push_back({rec.tile.key(), b.bbox, b.cls});
  }
  return out;
}

std::vector<std::size_t> ranking(std::span<const Detection> preds) {
  std::vector<std::size_t> idx(preds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto key = [&](std::size_t i) {
    const Detection& d = preds[i];
    return std::make_tuple(-dyadic(d.confidence), dyadic(d.bbox.w) * dyadic(d.bbox.h), dyadic(d.bbox.cx),
                           dyadic(d.bbox.cy), dyadic(d.bbox.w), dyadic(d.bbox.h), static_cast<int>(d.cls), i);
  };
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  return idx;
}

}  // namespace

Q dyadic(double v) {
  const double scaled = std::ldexp(v, 40);
  if (scaled != std::floor(scaled) || std::fabs(scaled) > 9.0e15) {
    throw std::invalid_argument("value is not on the dyadic test lattice");
  }
  return Q(static_cast<std::int64_t>(scaled), std::int64_t{1} << 40);
}

double to_double(const Q& q) {
  return static_cast<double>(q.numerator()) / static_cast<double>(q.denominator());
}

Q iou(const BBox& a, const BBox& b) {
  const Q two(2);
  const Q al = dyadic(a.cx) - dyadic(a.w) / two, ar = dyadic(a.cx) + dyadic(a.w) / two;
  const Q at = dyadic(a.cy) - dyadic(a.h) / two, ab = dyadic(a.cy) + dyadic(a.h) / two;
  const Q bl = dyadic(b.cx) - dyadic(b.w) / two, br = dyadic(b.cx) + dyadic(b.w) / two;
  const Q bt = dyadic(b.cy) - dyadic(b.h) / two, bb = dyadic(b.cy) + dyadic(b.h) / two;
  const Q iw = std::min(ar, br) - std::max(al, bl);
  const Q ih = std::min(ab, bb) - std::max(at, bt);
  if (iw <= 0 || ih <= 0) return Q(0);
  const Q inter = iw * ih;
  const Q uni = (ar - al) * (ab - at) + (br - bl) * (bb - bt) - inter;
  return inter / uni;
}

Matching match(std::span<const Detection> preds, std::span<const AnnotationRecord> gts, Q threshold) {
  Matching m;
  m.positives.assign(kNumClasses, 0);
  std::vector<Gt> truth = flatten(gts);
  std::set<std::string> images;
  for (const auto& rec : gts) images.insert(rec.tile.key());
  for (const auto& g : truth) ++m.positives[index_of(g.cls)];

  for (std::size_t i : ranking(preds)) {
    const Detection& d = preds[i];
    RankedPrediction rp{i, image_of(d), d.cls, d.confidence, false};
    images.insert(rp.image);
    std::ptrdiff_t best = -1;
    Q best_iou(-1);
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (truth[g].taken || truth[g].image != rp.image || truth[g].cls != d.cls) continue;
      const Q v = oracle::iou(d.bbox, truth[g].box);
      if (v >= threshold && v > best_iou) {
        best_iou = v;
        best = static_cast<std::ptrdiff_t>(g);
      }
    }
    if (best >= 0) {
      truth[static_cast<std::size_t>(best)].taken = true;
      rp.true_positive = true;
    }
    m.ranked.push_back(rp);
  }
  m.images = images.size();
  return m;
}

Q ap11(const Matching& m, CellClass cls) {
  const auto npos = static_cast<std::int64_t>(m.positives[index_of(cls)]);
  if (npos == 0) throw std::invalid_argument("no positives");
  std::vector<std::pair<Q, Q>> curve;  // (recall, precision) after each prediction
  std::int64_t tp = 0, n = 0;
  for (const auto& p : m.ranked) {
    if (p.cls != cls) continue;
    ++n;
    if (p.true_positive) ++tp;
    curve.emplace_back(Q(tp, npos), Q(tp, n));
  }
  Q sum(0);
  for (int level = 0; level <= 10; ++level) {
    Q best(0);
    for (const auto& [r, p] : curve) {
      if (r >= Q(level, 10)) best = std::max(best, p);
    }
    sum += best;
  }
  return sum / Q(11);
}

Q precision(const Matching& m, CellClass cls) {
  std::int64_t tp = 0, n = 0;
  for (const auto& p : m.ranked) {
    if (p.cls != cls) continue;
    ++n;
    tp += p.true_positive ? 1 : 0;
  }
  return n == 0 ? Q(0) : Q(tp, n);
}

Q recall(const Matching& m, CellClass cls) {
  std::int64_t tp = 0;
  for (const auto& p : m.ranked) tp += (p.cls == cls && p.true_positive) ? 1 : 0;
  return Q(tp, static_cast<std::int64_t>(m.positives[index_of(cls)]));
}

Q f1(const Matching& m, CellClass cls) {
  // Harmonic mean of precision and recall, cleared of fractions.
  std::int64_t tp = 0, predicted = 0;
  for (const auto& p : m.ranked) {
    if (p.cls != cls) continue;
    ++predicted;
    tp += p.true_positive ? 1 : 0;
  }
  const auto npos = static_cast<std::int64_t>(m.positives[index_of(cls)]);
  if (tp == 0) return Q(0);
  return Q(2 * tp, predicted + npos);
}

double lamr(const Matching& m, CellClass cls) {
  const auto npos = static_cast<long double>(m.positives[index_of(cls)]);
  std::set<double> thresholds;
  for (const auto& p : m.ranked) {
    if (p.cls == cls) thresholds.insert(p.confidence);
  }
  long double log_sum = 0.0L;
  for (int k = 0; k < 9; ++k) {
    const double ref = std::pow(10.0, -2.0 + 2.0 * k / 8.0);
    long double best = 1.0L;  // keeping nothing: no false positives, all missed
    for (double t : thresholds) {
      std::uint64_t tp = 0, fp = 0;
      for (const auto& p : m.ranked) {
        if (p.cls != cls || p.confidence < t) continue;
        (p.true_positive ? tp : fp) += 1;
      }
      const double fppi = static_cast<double>(fp) / static_cast<double>(m.images);
      if (fppi <= ref) best = std::min(best, 1.0L - static_cast<long double>(tp) / npos);
    }
    log_sum += std::log(std::max(best, 1e-10L));
  }
  return static_cast<double>(std::exp(log_sum / 9.0L));
}

Q auc(std::span<const ScoredLabel> scored) {
  std::int64_t pos = 0, neg = 0, twice_wins = 0;
  for (const auto& a : scored) (a.positive ? pos : neg) += 1;
  for (const auto& a : scored) {
    if (!a.positive) continue;
    for (const auto& b : scored) {
      if (b.positive) continue;
      if (a.score > b.score) twice_wins += 2;
      else if (a.score == b.score) twice_wins += 1;
    }
  }
  return Q(twice_wins, 2 * pos * neg);
}

Confusion confusion(std::span<const Detection> preds, std::span<const AnnotationRecord> gts, Q threshold,
                    std::span<const CellClass> classes) {
  const auto slot = [&](CellClass c) -> std::ptrdiff_t {
    const auto it = std::find(classes.begin(), classes.end(), c);
    return it == classes.end() ? -1 : it - classes.begin();
  };
  Confusion out;
  out.counts.assign(classes.size(), std::vector<std::uint64_t>(classes.size(), 0));
  out.totals.assign(classes.size(), 0);
  std::vector<Gt> truth;
  for (auto& g : flatten(gts)) {
    if (slot(g.cls) < 0) continue;
    ++out.totals[static_cast<std::size_t>(slot(g.cls))];
    truth.push_back(g);
  }
  for (std::size_t i : ranking(preds)) {
    const Detection& d = preds[i];
    if (slot(d.cls) < 0) continue;
    const std::string img = image_of(d);
    std::ptrdiff_t best = -1;
    Q best_iou(-1);
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (truth[g].taken || truth[g].image != img) continue;
      const Q v = oracle::iou(d.bbox, truth[g].box);
      if (v >= threshold && v > best_iou) {
        best_iou = v;
        best = static_cast<std::ptrdiff_t>(g);
      }
    }
    if (best < 0) continue;
    Gt& g = truth[static_cast<std::size_t>(best)];
    g.taken = true;
    ++out.counts[static_cast<std::size_t>(slot(g.cls))][static_cast<std::size_t>(slot(d.cls))];
  }
  return out;
}

Q chi_square(std::span<const Q> x, std::span<const Q> y) {
  if (x.size() != y.size()) throw std::invalid_argument("length mismatch");
  Q sum(0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Q s = x[i] + y[i];
    if (s.numerator() == 0) continue;
    sum += (x[i] - y[i]) * (x[i] - y[i]) / s;
  }
  return sum / Q(2);
}

}  // namespace marrow::oracle
