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

#include <gtest/gtest.h>

#include <random>

#include "marrow/cytology.hpp"
#include "marrow/error.hpp"
#include "marrow/eval_metrics.hpp"
#include "oracles.hpp"

namespace marrow {
namespace {

Detection det(CellClass c) { return {{0.5, 0.5, 0.1, 0.1}, c, 0.9, {0, 0}, "s"}; }

Hct hct(std::initializer_list<std::pair<CellClass, std::uint64_t>> items) {
  Hct h;
  for (const auto& [c, n] : items) h.counts[index_of(c)] = n;
  return h;
}

TEST(Histogram, CountsPerClassAndKeepsAuxiliaryClasses) {
  const std::vector<Detection> dets = {det(CellClass::kBlast), det(CellClass::kBlast), det(CellClass::kPlatelet)};
  const Hct h = hct_from_detections(dets);
  EXPECT_EQ(h[CellClass::kBlast], 2u);
  EXPECT_EQ(h[CellClass::kPlatelet], 1u);
  EXPECT_EQ(h.total(), 3u);
  EXPECT_EQ(convergence_subtotal(h.counts), 2u);
}

TEST(ChiSquare, KnownValuesAndErrors) {
  const std::vector<double> x = {0.5, 0.5}, y = {0.25, 0.75};
  EXPECT_DOUBLE_EQ(chi_square_distance(x, y), 1.0 / 15.0);
  EXPECT_EQ(chi_square_distance(x, x), 0.0);
  const std::vector<double> zeros = {0.0, 0.0};
  EXPECT_EQ(chi_square_distance(zeros, zeros), 0.0);
  const std::vector<double> three = {0.2, 0.3, 0.5};
  try {
    chi_square_distance(x, three);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(ChiSquare, SymmetricAndMatchesTheOracle) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x(13), y(13);
    std::vector<oracle::Q> qx, qy;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::uniform_int_distribution<int>(0, 8)(rng) / 8.0;
      y[i] = std::uniform_int_distribution<int>(0, 8)(rng) / 8.0;
      qx.push_back(oracle::dyadic(x[i]));
      qy.push_back(oracle::dyadic(y[i]));
    }
    EXPECT_EQ(chi_square_distance(x, y), chi_square_distance(y, x));
    EXPECT_EQ(chi_square_distance(x, y), oracle::to_double(oracle::chi_square(qx, qy)));
  }
}

TEST(Ratio, MyeloidOverErythroid) {
  const Hct h = hct({{CellClass::kNeutrophil, 6}, {CellClass::kBlast, 2}, {CellClass::kLymphocyte, 40},
                     {CellClass::kErythroblast, 4}});
  EXPECT_EQ(bm_me_ratio(h.counts), 2.0);
  EXPECT_FALSE(bm_me_ratio(hct({{CellClass::kBlast, 1}}).counts).has_value());
}

TEST(Vector, ProportionsOverConvergenceClasses) {
  const Hct h = hct({{CellClass::kNeutrophil, 3}, {CellClass::kErythroblast, 1}, {CellClass::kDebris, 50}});
  const ConvergenceVector v = convergence_vector(h.counts);
  EXPECT_EQ(v.values[0], 0.75);
  EXPECT_EQ(v.values[5], 0.25);
  EXPECT_TRUE(v.bm_me_defined);
  EXPECT_EQ(v.values.back(), 3.0);
  try {
    convergence_vector(hct({{CellClass::kDebris, 5}}).counts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyHistogram);
  }
}

TEST(Convergence, NeedsPatienceConsecutiveSmallSteps) {
  std::vector<TracePoint> trace;
  for (std::size_t i = 0; i < 9; ++i) trace.push_back({i + 2, 1e-6});
  EXPECT_FALSE(check_convergence(trace, 1e-5, 10));
  trace.push_back({11, 1e-6});
  EXPECT_TRUE(check_convergence(trace, 1e-5, 10));
  trace.push_back({12, 1e-5});  // not strictly below
  EXPECT_FALSE(check_convergence(trace, 1e-5, 10));
}

TEST(Accumulate, IdenticalTilesConvergeAfterPatience) {
  Ihct ihct;
  const Hct tile = hct({{CellClass::kNeutrophil, 4}, {CellClass::kErythroblast, 2}});
  for (int i = 0; i < 10; ++i) {
    accumulate_into(ihct, tile);
    EXPECT_FALSE(ihct.converged);
  }
  accumulate_into(ihct, tile);
  EXPECT_TRUE(ihct.converged);
  EXPECT_EQ(ihct.tiles_seen, 11u);
  EXPECT_EQ(ihct.trace.size(), 10u);
  EXPECT_EQ(ihct.trace.front().tile_index, 2u);
  try {
    accumulate_into(ihct, tile);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAlreadyConverged);
  }
  const Ihct forced = accumulate(ihct, tile, AccumulateMode::kForced);
  EXPECT_EQ(forced.tiles_seen, 12u);
}

TEST(Accumulate, EmptyTilesNeverConverge) {
  Ihct ihct;
  for (int i = 0; i < 30; ++i) accumulate_into(ihct, Hct{});
  EXPECT_FALSE(ihct.converged);
  EXPECT_EQ(ihct.trace.size(), 29u);
}

TEST(Report, PercentagesAndJsonRoundTrip) {
  Ihct ihct;
  accumulate_into(ihct, hct({{CellClass::kNeutrophil, 6}, {CellClass::kErythroblast, 2}, {CellClass::kPlatelet, 9}}));
  accumulate_into(ihct, hct({{CellClass::kNeutrophil, 2}}));
  const NdcReport r = ndc_report(ihct, "slide");
  EXPECT_EQ(ndc_percentage(r, CellClass::kNeutrophil), 0.8);
  EXPECT_FALSE(ndc_percentage(r, CellClass::kPlatelet).has_value());
  EXPECT_EQ(r.cells_counted, 10u);
  EXPECT_EQ(r.bm_me, 4.0);
  const NdcReport back = ndc_report_from_json(to_json(r));
  EXPECT_EQ(to_json(back), to_json(r));
  EXPECT_NE(ndc_report_csv(r).find("neutrophil,8,"), std::string::npos);
}

TEST(RoiMetrics, HeldOutConfusion) {
  const BinaryMetrics m = binary_metrics({.tp = 78, .fp = 9, .tn = 891, .fn = 22});
  EXPECT_DOUBLE_EQ(*m.accuracy, 969.0 / 1000.0);
  EXPECT_DOUBLE_EQ(*m.precision, 78.0 / 87.0);
  EXPECT_DOUBLE_EQ(*m.recall, 0.78);
  EXPECT_DOUBLE_EQ(*m.specificity, 0.99);
  EXPECT_DOUBLE_EQ(*m.npv, 891.0 / 913.0);
}

}  // namespace
}  // namespace marrow
