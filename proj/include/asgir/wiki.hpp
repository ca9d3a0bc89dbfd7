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

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace asgir {

struct SpeciesInfo {
  int species_id = -1;
  std::string species;
  std::string page_title;
  std::string summary;
  std::optional<std::string> habitat;
  std::optional<std::string> characteristics;
  std::vector<std::pair<std::string, std::string>> infobox;
  std::string source_url;
  std::string fetched_at;  // ISO-8601 UTC
};

nlohmann::ordered_json to_json(const SpeciesInfo& info);

enum class FetchMode { kLive, kFixture };

struct FetchPolicy {
  FetchMode mode = FetchMode::kFixture;
  std::filesystem::path fixture_dir = "fixtures";
  std::filesystem::path cache_dir;  // empty: no disk cache
  double timeout_s = 10.0;
  int max_retries = 2;
  double min_interval_s = 1.0;
  std::string base_url = "https://en.wikipedia.org";
  std::string user_agent;  // empty: ASGIR_USER_AGENT or the built-in default

  void validate() const;
  std::string effective_user_agent() const;
};

// "Barn-Swallow" -> "Barn swallow". Tokens that start lowercase stay
// hyphen-joined to their predecessor ("Black-headed-Gull" -> "Black-headed
// gull"). In fixture mode a missing fixture raises NotFoundError.
std::string resolve_page(const std::string& species_name, const FetchPolicy& policy);

// "/wiki/Barn_swallow" style path with percent-encoding.
std::string wiki_path(const std::string& page_title);

// Live mode: cache hit, else throttled HTTP GET (one redirect followed),
// then cache write. Fixture mode: reads <fixture_dir>/<title>.html only.
std::vector<std::uint8_t> fetch_html(const std::string& page_title, const FetchPolicy& policy);

// Pure HTML-to-SpeciesInfo extraction. Throws ParseError when the document
// has no text paragraphs.
SpeciesInfo parse_species_page(std::span<const std::uint8_t> html, int species_id,
                               const std::string& species_name);

// Removes citation markers, '<' / '>' and digit-']' runs; folds no-break spaces and collapses
// whitespace.
std::string clean_text(std::string_view raw);

// resolve_page + fetch_html + parse_species_page, with source URL and
// fetch timestamp filled in.
SpeciesInfo retrieve_species_info(int species_id, const std::string& species_name,
                                  const FetchPolicy& policy);

std::string utc_timestamp();

}  // namespace asgir
