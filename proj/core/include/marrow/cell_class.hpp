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

#ifndef MARROW_CELL_CLASS_HPP_
#define MARROW_CELL_CLASS_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace marrow {

/// The closed 19-class object taxonomy. Integer ids are the enumerator values
/// and are part of every on-disk format (yolo-txt class ids, wire responses).
enum class CellClass : std::uint8_t {
  kNeutrophil = 0,
  kMetamyelocyte = 1,
  kMyelocyte = 2,
  kPromyelocyte = 3,
  kBlast = 4,
  kErythroblast = 5,
  kMegakaryocyteNucleus = 6,
  kLymphocyte = 7,
  kMonocyte = 8,
  kPlasmaCell = 9,
  kEosinophil = 10,
  kBasophil = 11,
  kMegakaryocyte = 12,
  kDebris = 13,
  kHistiocyte = 14,
  kMastCell = 15,
  kPlatelet = 16,
  kPlateletClump = 17,
  kOtherCell = 18,
};

inline constexpr std::size_t kNumClasses = 19;

constexpr std::size_t index_of(CellClass c) noexcept {
  return static_cast<std::size_t>(c);
}

inline constexpr std::array<CellClass, kNumClasses> kAllClasses = {
    CellClass::kNeutrophil,    CellClass::kMetamyelocyte,
    CellClass::kMyelocyte,     CellClass::kPromyelocyte,
    CellClass::kBlast,         CellClass::kErythroblast,
    CellClass::kMegakaryocyteNucleus,
    CellClass::kLymphocyte,    CellClass::kMonocyte,
    CellClass::kPlasmaCell,    CellClass::kEosinophil,
    CellClass::kBasophil,      CellClass::kMegakaryocyte,
    CellClass::kDebris,        CellClass::kHistiocyte,
    CellClass::kMastCell,      CellClass::kPlatelet,
    CellClass::kPlateletClump, CellClass::kOtherCell,
};

/// Cell types entering the convergence vector and the NDC percentages.
inline constexpr std::array<CellClass, 12> kConvergenceClasses = {
    CellClass::kNeutrophil,  CellClass::kMetamyelocyte,
    CellClass::kMyelocyte,   CellClass::kPromyelocyte,
    CellClass::kBlast,       CellClass::kErythroblast,
    CellClass::kLymphocyte,  CellClass::kMonocyte,
    CellClass::kPlasmaCell,  CellClass::kEosinophil,
    CellClass::kBasophil,    CellClass::kMegakaryocyte,
};

/// Numerator of the myeloid-to-erythroid ratio.
inline constexpr std::array<CellClass, 6> kMyeloidClasses = {
    CellClass::kBlast,         CellClass::kPromyelocyte,
    CellClass::kMyelocyte,     CellClass::kMetamyelocyte,
    CellClass::kNeutrophil,    CellClass::kEosinophil,
};

/// Cell types present in a traditional manual differential count.
inline constexpr std::array<CellClass, 10> kManualNdcClasses = {
    CellClass::kNeutrophil,  CellClass::kMetamyelocyte,
    CellClass::kMyelocyte,   CellClass::kPromyelocyte,
    CellClass::kBlast,       CellClass::kLymphocyte,
    CellClass::kMonocyte,    CellClass::kEosinophil,
    CellClass::kPlasmaCell,  CellClass::kErythroblast,
};

/// Classes scored by the detection evaluation (basophil, mast cell and
/// other cell are too rare to evaluate and are excluded).
inline constexpr std::array<CellClass, 16> kEvaluationClasses = {
    CellClass::kNeutrophil,    CellClass::kMetamyelocyte,
    CellClass::kMyelocyte,     CellClass::kPromyelocyte,
    CellClass::kBlast,         CellClass::kErythroblast,
    CellClass::kMegakaryocyteNucleus,
    CellClass::kLymphocyte,    CellClass::kMonocyte,
    CellClass::kPlasmaCell,    CellClass::kEosinophil,
    CellClass::kMegakaryocyte, CellClass::kDebris,
    CellClass::kHistiocyte,    CellClass::kPlatelet,
    CellClass::kPlateletClump,
};

/// Canonical snake_case name, e.g. "plasma_cell".
std::string_view class_name(CellClass c) noexcept;

std::optional<CellClass> class_from_name(std::string_view name) noexcept;

std::optional<CellClass> class_from_id(std::int64_t id) noexcept;

/// Like class_from_id but throws Error(kUnknownClassId).
CellClass class_from_id_or_throw(std::int64_t id);

/// Like class_from_name but throws Error(kUnknownClassName).
CellClass class_from_name_or_throw(std::string_view name);

}  // namespace marrow

#endif  // MARROW_CELL_CLASS_HPP_
