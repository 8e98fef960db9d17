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

#include "marrow/cytology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "exact.hpp"
#include "marrow/error.hpp"

namespace marrow {
namespace {

ConvergenceVector vector_or_zero(const ClassCounts& counts) {
  if (convergence_subtotal(counts) == 0) return {};
  return convergence_vector(counts);
}

}  // namespace

std::uint64_t Hct::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

Hct hct_from_detections(std::span<const Detection> dets) {
  Hct hct;
  for (const auto& d : dets) {
    ++hct.counts[index_of(d.cls)];
    if (!hct.tile_coord) hct.tile_coord = d.tile_coord;
  }
  return hct;
}

double chi_square_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(ErrorCode::kDimensionMismatch, "chi-square vectors differ in length");
  }
  const bool finite = std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); }) &&
                      std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
  if (!finite) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double denom = x[i] + y[i];
      if (denom != 0.0) sum += (x[i] - y[i]) * (x[i] - y[i]) / denom;
    }
    return 0.5 * sum;
  }
  // Summed exactly and rounded once, so the result is the correctly rounded
  // distance of the given inputs.
  detail::Fraction sum;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const detail::Fraction xi = detail::exact(x[i]);
    const detail::Fraction yi = detail::exact(y[i]);
    detail::Fraction s = detail::add(xi, yi);
    if (s.num == 0) continue;
    const detail::Fraction d = detail::sub(xi, yi);
    detail::Fraction term{d.num * d.num * s.den, d.den * d.den * s.num};
    if (term.den < 0) {
      term.num = -term.num;
      term.den = -term.den;
    }
    sum = detail::add(sum, term);
  }
  return detail::rounded_quotient(sum.num, sum.den * 2);
}

double chi_square_distance(const ConvergenceVector& x, const ConvergenceVector& y) {
  return chi_square_distance(x.values, y.values);
}

std::optional<double> bm_me_ratio(const ClassCounts& counts) noexcept {
  const std::uint64_t erythroid = counts[index_of(CellClass::kErythroblast)];
  if (erythroid == 0) return std::nullopt;
  std::uint64_t myeloid = 0;
  for (CellClass c : kMyeloidClasses) myeloid += counts[index_of(c)];
  return static_cast<double>(myeloid) / static_cast<double>(erythroid);
}

std::uint64_t convergence_subtotal(const ClassCounts& counts) noexcept {
  std::uint64_t n = 0;
  for (CellClass c : kConvergenceClasses) n += counts[index_of(c)];
  return n;
}

ConvergenceVector convergence_vector(const ClassCounts& counts) {
  const std::uint64_t subtotal = convergence_subtotal(counts);
  if (subtotal == 0) fail(ErrorCode::kEmptyHistogram, "no convergence-class objects counted");
  ConvergenceVector v;
  for (std::size_t i = 0; i < kConvergenceClasses.size(); ++i) {
    v.values[i] = static_cast<double>(counts[index_of(kConvergenceClasses[i])]) /
                  static_cast<double>(subtotal);
  }
  const auto ratio = bm_me_ratio(counts);
  v.bm_me_defined = ratio.has_value();
  v.values.back() = ratio.value_or(0.0);
  return v;
}

bool check_convergence(std::span<const TracePoint> trace, double threshold, int patience) {
  if (patience < 1 || trace.size() < static_cast<std::size_t>(patience)) return false;
  return std::all_of(trace.end() - patience, trace.end(),
                     [&](const TracePoint& p) { return p.distance < threshold; });
}

void accumulate_into(Ihct& ihct, const Hct& hct, AccumulateMode mode) {
  if (ihct.converged && mode == AccumulateMode::kStrict) {
    fail(ErrorCode::kAlreadyConverged, "IHCT already converged; use forced mode to continue");
  }
  const ClassCounts before = ihct.counts;
  for (std::size_t i = 0; i < kNumClasses; ++i) ihct.counts[i] += hct.counts[i];
  ++ihct.tiles_seen;
  if (ihct.tiles_seen >= 2) {
    const double d = chi_square_distance(vector_or_zero(before), vector_or_zero(ihct.counts));
    ihct.trace.push_back({ihct.tiles_seen, d});
  }
  if (convergence_subtotal(ihct.counts) > 0) {
    ihct.converged = ihct.converged ||
                     check_convergence(ihct.trace, ihct.params.threshold, ihct.params.patience);
  }
}

Ihct accumulate(Ihct ihct, const Hct& hct, AccumulateMode mode) {
  accumulate_into(ihct, hct, mode);
  return ihct;
}

NdcReport ndc_report(const Ihct& ihct, const std::string& slide_id) {
  const std::uint64_t subtotal = convergence_subtotal(ihct.counts);
  if (subtotal == 0) fail(ErrorCode::kEmptyHistogram, "no NDC cells counted");
  NdcReport r;
  r.slide_id = slide_id;
  r.counts = ihct.counts;
  for (std::size_t i = 0; i < kConvergenceClasses.size(); ++i) {
    r.percentages[i] = static_cast<double>(ihct.counts[index_of(kConvergenceClasses[i])]) /
                       static_cast<double>(subtotal);
  }
  const auto ratio = bm_me_ratio(ihct.counts);
  r.bm_me_defined = ratio.has_value();
  r.bm_me = ratio.value_or(0.0);
  r.chi_square_final = ihct.trace.empty() ? 0.0 : ihct.trace.back().distance;
  r.tiles_seen = ihct.tiles_seen;
  r.cells_counted = subtotal;
  r.converged = ihct.converged;
  r.trace = ihct.trace;
  return r;
}

std::optional<double> ndc_percentage(const NdcReport& report, CellClass c) noexcept {
  const auto it = std::find(kConvergenceClasses.begin(), kConvergenceClasses.end(), c);
  if (it == kConvergenceClasses.end()) return std::nullopt;
  return report.percentages[static_cast<std::size_t>(it - kConvergenceClasses.begin())];
}

nlohmann::json to_json(const NdcReport& r) {
  nlohmann::json counts = nlohmann::json::object();
  for (CellClass c : kAllClasses) counts[std::string(class_name(c))] = r.counts[index_of(c)];
  nlohmann::json pct = nlohmann::json::object();
  for (std::size_t i = 0; i < kConvergenceClasses.size(); ++i) {
    pct[std::string(class_name(kConvergenceClasses[i]))] = r.percentages[i];
  }
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& p : r.trace) trace.push_back({p.tile_index, p.distance});
  return {{"slide_id", r.slide_id},
          {"counts", std::move(counts)},
          {"percentages", std::move(pct)},
          {"bm_me", r.bm_me},
          {"bm_me_defined", r.bm_me_defined},
          {"chi_square_final", r.chi_square_final},
          {"tiles_seen", r.tiles_seen},
          {"cells_counted", r.cells_counted},
          {"converged", r.converged},
          {"trace", std::move(trace)}};
}

NdcReport ndc_report_from_json(const nlohmann::json& j) {
  try {
    NdcReport r;
    r.slide_id = j.at("slide_id").get<std::string>();
    for (CellClass c : kAllClasses) {
      r.counts[index_of(c)] = j.at("counts").at(std::string(class_name(c))).get<std::uint64_t>();
    }
    for (std::size_t i = 0; i < kConvergenceClasses.size(); ++i) {
      r.percentages[i] =
          j.at("percentages").at(std::string(class_name(kConvergenceClasses[i]))).get<double>();
    }
    r.bm_me = j.at("bm_me").get<double>();
    r.bm_me_defined = j.at("bm_me_defined").get<bool>();
    r.chi_square_final = j.at("chi_square_final").get<double>();
    r.tiles_seen = j.at("tiles_seen").get<std::size_t>();
    r.cells_counted = j.at("cells_counted").get<std::uint64_t>();
    r.converged = j.at("converged").get<bool>();
    for (const auto& p : j.at("trace")) {
      r.trace.push_back({p.at(0).get<std::size_t>(), p.at(1).get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, std::string("NDC report JSON: ") + e.what());
  }
}

std::string ndc_report_csv(const NdcReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "class,count,percentage\n";
  for (CellClass c : kAllClasses) {
    out << class_name(c) << ',' << r.counts[index_of(c)] << ',';
    if (const auto p = ndc_percentage(r, c)) out << *p;
    out << '\n';
  }
  out << "bm_me,";
  if (r.bm_me_defined) out << r.bm_me;
  out << ",\n";
  out << "chi_square_final," << r.chi_square_final << ",\n";
  out << "tiles_seen," << r.tiles_seen << ",\n";
  out << "cells_counted," << r.cells_counted << ",\n";
  out << "converged," << (r.converged ? "true" : "false") << ",\n";
  return out.str();
}

}  // namespace marrow
