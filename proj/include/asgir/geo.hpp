/* Copyright 2026 The ASGIR Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "asgir/heads.hpp"

namespace asgir {

struct Region {
  std::string id;
  std::string display_name;
  std::set<int> species;  // label ids
};

// Region id -> permitted species. Immutable once loaded.
class RegionIndex {
 public:
  RegionIndex() = default;
  explicit RegionIndex(std::map<std::string, Region> regions);

  const Region* find(std::string_view id) const;
  const Region& at(std::string_view id) const;  // throws UnknownRegionError
  // Lexicographic by id.
  std::vector<const Region*> sorted() const;
  std::size_t size() const { return regions_.size(); }
  bool contains(std::string_view region, int label) const;

 private:
  std::map<std::string, Region, std::less<>> regions_;
};

// Accepts CSV (`region,species[,display_name]`, one pair per row) or a JSON
// object mapping region ids to either a species array or
// {"display_name": ..., "species": [...]}. Duplicate pairs collapse; unknown
// species names are reported together in one UnknownSpeciesError.
RegionIndex load_region_index(std::string_view text, const LabelRegistry& registry);

// Sets entries for species outside `region` to -inf. No region: unchanged.
ScoreVector mask_scores(const ScoreVector& scores, const std::optional<std::string>& region,
                        const RegionIndex& index);

}  // namespace asgir
