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

#include "marrow/cell_class.hpp"

#include <string>

#include "marrow/error.hpp"

namespace marrow {
namespace {

constexpr std::array<std::string_view, kNumClasses> kNames = {
    "neutrophil",   "metamyelocyte", "myelocyte",
    "promyelocyte", "blast",         "erythroblast",
    "megakaryocyte_nucleus",
    "lymphocyte",   "monocyte",      "plasma_cell",
    "eosinophil",   "basophil",      "megakaryocyte",
    "debris",       "histiocyte",    "mast_cell",
    "platelet",     "platelet_clump", "other_cell",
};

}  // namespace

std::string_view class_name(CellClass c) noexcept { return kNames[index_of(c)]; }

std::optional<CellClass> class_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<CellClass>(i);
  }
  return std::nullopt;
}

std::optional<CellClass> class_from_id(std::int64_t id) noexcept {
  if (id < 0 || id >= static_cast<std::int64_t>(kNumClasses)) {
    return std::nullopt;
  }
  return static_cast<CellClass>(id);
}

CellClass class_from_id_or_throw(std::int64_t id) {
  auto c = class_from_id(id);
  if (!c) fail(ErrorCode::kUnknownClassId, "class id " + std::to_string(id) + " outside 0..18");
  return *c;
}

CellClass class_from_name_or_throw(std::string_view name) {
  auto c = class_from_name(name);
  if (!c) fail(ErrorCode::kUnknownClassName, "unknown class name '" + std::string(name) + "'");
  return *c;
}

}  // namespace marrow
