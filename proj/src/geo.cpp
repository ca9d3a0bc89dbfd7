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

#include "asgir/geo.hpp"

#include <json.hpp>

#include <limits>
#include <sstream>

#include "asgir/error.hpp"
#include "asgir/util.hpp"

namespace asgir {

RegionIndex::RegionIndex(std::map<std::string, Region> regions) {
  for (auto& [id, r] : regions) {
    if (r.species.empty()) throw ArgumentError("region " + id + " has an empty species set");
    if (r.display_name.empty()) r.display_name = id;
    regions_.emplace(id, std::move(r));
  }
}

const Region* RegionIndex::find(std::string_view id) const {
  auto it = regions_.find(id);
  return it == regions_.end() ? nullptr : &it->second;
}

const Region& RegionIndex::at(std::string_view id) const {
  if (const Region* r = find(id)) return *r;
  throw UnknownRegionError("unknown region " + std::string(id));
}

std::vector<const Region*> RegionIndex::sorted() const {
  std::vector<const Region*> out;
  for (const auto& [id, r] : regions_) out.push_back(&r);
  return out;
}

bool RegionIndex::contains(std::string_view region, int label) const {
  return at(region).species.count(label) != 0;
}

RegionIndex load_region_index(std::string_view text, const LabelRegistry& registry) {
  std::map<std::string, Region> regions;
  std::set<std::string> unknown;
  auto add = [&](const std::string& region, const std::string& species) {
    if (region.empty()) throw ArgumentError("region index: empty region id");
    Region& r = regions[region];
    r.id = region;
    if (auto id = registry.find(species)) r.species.insert(*id);
    else unknown.insert(species);
  };

  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw ArgumentError(std::string("region index: invalid JSON: ") + e.what());
    }
    for (const auto& [region, value] : doc.items()) {
      const nlohmann::json* list = &value;
      if (value.is_object()) {
        if (!value.contains("species")) throw ArgumentError("region index: " + region + " lacks a species list");
        list = &value.at("species");
        if (value.contains("display_name") && value.at("display_name").is_string())
          regions[region].display_name = value.at("display_name").get<std::string>();
      }
      if (!list->is_array()) throw ArgumentError("region index: " + region + " species must be an array");
      regions[region].id = region;
      for (const auto& s : *list) {
        if (!s.is_string()) throw ArgumentError("region index: species names must be strings");
        add(region, s.get<std::string>());
      }
    }
  } else {
    std::istringstream in{std::string(text)};
    std::string line;
    bool header = false;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty()) continue;
      auto fields = split_csv_line(line);
      for (auto& f : fields) f = trim(f);
      if (!header) {
        if (fields.size() < 2 || fields[0] != "region" || fields[1] != "species")
          throw ArgumentError("region index: expected header 'region,species'");
        header = true;
        continue;
      }
      if (fields.size() < 2 || fields.size() > 3)
        throw ArgumentError("region index line " + std::to_string(line_no) + ": expected 2 or 3 fields");
      add(fields[0], fields[1]);
      if (fields.size() == 3 && !fields[2].empty()) regions[fields[0]].display_name = fields[2];
    }
    if (!header) throw ArgumentError("region index: empty input");
  }
  if (!unknown.empty()) {
    std::string names;
    for (const auto& u : unknown) names += (names.empty() ? "" : ", ") + u;
    throw UnknownSpeciesError("region index references unknown species: " + names);
  }
  return RegionIndex(std::move(regions));
}

ScoreVector mask_scores(const ScoreVector& scores, const std::optional<std::string>& region,
                        const RegionIndex& index) {
  if (!region) return scores;
  const Region& r = index.at(*region);
  ScoreVector out(scores.size(), -std::numeric_limits<double>::infinity());
  for (int id : r.species)
    if (static_cast<std::size_t>(id) < scores.size()) out[static_cast<std::size_t>(id)] = scores[static_cast<std::size_t>(id)];
  return out;
}

}  // namespace asgir
