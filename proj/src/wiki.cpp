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

#include "asgir/wiki.hpp"

#include <httplib.h>

#include <chrono>
#include <cctype>
#include <cstdlib>
#include <ctime>
#include <map>
#include <mutex>
#include <thread>

#include "asgir/error.hpp"
#include "asgir/html.hpp"
#include "asgir/util.hpp"

namespace asgir {
namespace {

using Clock = std::chrono::steady_clock;

constexpr const char* kDefaultUserAgent =
    "asgir/0.1 (bird sound recognition; species info lookup)";

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string file_key(const std::string& title) {
  std::string out;
  for (char c : title) {
    if (c == '/') out += "%2F";
    else if (c == '\\') out += "%5C";
    else if (c == '\0') out += "%00";
    else out += c;
  }
  if (out == "." || out == "..") out = "%2E" + out.substr(1);
  return out + ".html";
}

// Process-wide politeness clock per host.
void throttle(const std::string& host, double min_interval_s) {
  static std::mutex mu;
  static std::map<std::string, Clock::time_point> next_slot;
  Clock::time_point slot;
  {
    std::lock_guard lock(mu);
    const auto now = Clock::now();
    auto it = next_slot.find(host);
    slot = (it == next_slot.end() || it->second < now) ? now : it->second;
    next_slot[host] =
        slot + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(min_interval_s));
  }
  std::this_thread::sleep_until(slot);
}

std::pair<std::string, std::string> split_url(const std::string& url, const std::string& fallback_host) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) return {fallback_host, url};
  const auto path = url.find('/', scheme + 3);
  if (path == std::string::npos) return {url, "/"};
  return {url.substr(0, path), url.substr(path)};
}

bool skip_inline(const html::Node& n) {
  if (n.tag == "sup" && (n.class_contains("reference") || n.class_contains("noprint"))) return true;
  if (n.tag == "span" && n.class_contains("mw-editsection")) return true;
  if (n.tag == "style" || n.tag == "script") return true;
  const auto style = n.attr("style");
  return style.find("display:none") != std::string_view::npos ||
         style.find("display: none") != std::string_view::npos;
}

bool skip_block(const html::Node& n) {
  static const char* kSkipClasses[] = {"navbox", "hatnote", "thumb", "reflist", "shortdescription",
                                       "toc", "sidebar", "metadata", "mw-references", "gallery",
                                       "mw-empty-elt"};
  if (n.tag == "table" || n.tag == "figure" || n.tag == "nav" || n.tag == "style" ||
      n.tag == "script" || n.tag == "noscript")
    return true;
  if (skip_inline(n)) return true;
  if (n.tag == "div" || n.tag == "p")
    for (const char* c : kSkipClasses)
      if (n.class_contains(c)) return true;
  return false;
}

int heading_level(const html::Node& n) {
  if (n.tag.size() == 2 && n.tag[0] == 'h' && n.tag[1] >= '2' && n.tag[1] <= '6') return n.tag[1] - '0';
  return 0;
}

struct Block {
  int level = 0;  // 0 for paragraphs
  std::string text;
};

std::optional<std::string> section_text(const std::vector<Block>& blocks, std::string_view needle) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].level == 0 || to_lower(blocks[i].text).find(needle) == std::string::npos) continue;
    std::string out;
    for (std::size_t j = i + 1; j < blocks.size(); ++j) {
      if (blocks[j].level != 0) {
        if (blocks[j].level <= blocks[i].level) break;
        continue;
      }
      if (!out.empty()) out += "\n\n";
      out += blocks[j].text;
    }
    if (!out.empty()) return out;
  }
  return std::nullopt;
}

}  // namespace

nlohmann::ordered_json to_json(const SpeciesInfo& info) {
  nlohmann::ordered_json j;
  j["species"] = info.species;
  j["page_title"] = info.page_title;
  j["summary"] = info.summary;
  j["habitat"] = info.habitat ? nlohmann::ordered_json(*info.habitat) : nullptr;
  j["characteristics"] = info.characteristics ? nlohmann::ordered_json(*info.characteristics) : nullptr;
  auto box = nlohmann::ordered_json::array();
  for (const auto& [k, v] : info.infobox) box.push_back({{"key", k}, {"value", v}});
  j["infobox"] = std::move(box);
  j["source_url"] = info.source_url;
  j["fetched_at"] = info.fetched_at;
  return j;
}

void FetchPolicy::validate() const {
  if (!(timeout_s > 0.0)) throw ArgumentError("fetch policy: timeout must be positive");
  if (max_retries < 0) throw ArgumentError("fetch policy: retries must be >= 0");
  if (!(min_interval_s >= 0.0)) throw ArgumentError("fetch policy: min interval must be >= 0");
}

std::string FetchPolicy::effective_user_agent() const {
  if (!user_agent.empty()) return user_agent;
  if (const char* env = std::getenv("ASGIR_USER_AGENT"); env && *env) return env;
  return kDefaultUserAgent;
}

std::string resolve_page(const std::string& species_name, const FetchPolicy& policy) {
  const std::string name = trim(species_name);
  if (name.empty()) throw ArgumentError("resolve_page: empty species name");
  std::string title;
  std::size_t start = 0;
  bool first = true;
  while (start <= name.size()) {
    std::size_t dash = name.find('-', start);
    if (dash == std::string::npos) dash = name.size();
    const std::string token = name.substr(start, dash - start);
    if (!token.empty()) {
      if (!first) {
        const bool compound = std::islower(static_cast<unsigned char>(token[0])) != 0;
        title += compound ? '-' : ' ';
      }
      title += first ? token.substr(0, 1) + to_lower(token.substr(1)) : to_lower(token);
      first = false;
    }
    start = dash + 1;
  }
  if (policy.mode == FetchMode::kFixture &&
      !std::filesystem::exists(policy.fixture_dir / file_key(title)))
    throw NotFoundError("no page for " + name + " (tried \"" + title + "\")", title);
  return title;
}

std::string wiki_path(const std::string& page_title) {
  static const char* hex = "0123456789ABCDEF";
  std::string out = "/wiki/";
  for (unsigned char c : page_title) {
    if (c == ' ') out += '_';
    else if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == '(' || c == ')' ||
             c == ',' || c == '\'')
      out += static_cast<char>(c);
    else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out;
}

std::vector<std::uint8_t> fetch_html(const std::string& page_title, const FetchPolicy& policy) {
  policy.validate();
  if (policy.mode == FetchMode::kFixture) {
    const auto path = policy.fixture_dir / file_key(page_title);
    if (!std::filesystem::exists(path))
      throw NotFoundError("fixture missing for \"" + page_title + "\"", page_title);
    return read_file_bytes(path);
  }

  if (!policy.cache_dir.empty()) {
    const auto cached = policy.cache_dir / file_key(page_title);
    if (std::filesystem::exists(cached)) return read_file_bytes(cached);
  }

  auto [host, path] = split_url(policy.base_url + wiki_path(page_title), policy.base_url);
  const httplib::Headers headers = {{"User-Agent", policy.effective_user_agent()}};
  const auto secs = static_cast<time_t>(policy.timeout_s);
  const auto usecs = static_cast<time_t>((policy.timeout_s - static_cast<double>(secs)) * 1e6);
  bool redirected = false;
  for (;;) {
    httplib::Client cli(host);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_follow_location(false);
    httplib::Result res;
    for (int attempt = 0;; ++attempt) {
      throttle(host, policy.min_interval_s);
      res = cli.Get(path, headers);
      if (res) break;
      if (attempt >= policy.max_retries)
        throw TransportError("fetch " + host + path + " failed after " + std::to_string(attempt + 1) +
                             " attempts: " + httplib::to_string(res.error()));
    }
    const int status = res->status;
    if (status >= 300 && status < 400 && res->has_header("Location")) {
      if (redirected) throw StatusError("too many redirects for " + page_title, status);
      redirected = true;
      std::tie(host, path) = split_url(res->get_header_value("Location"), host);
      continue;
    }
    if (status >= 400)
      throw StatusError("HTTP " + std::to_string(status) + " for " + host + path, status);
    if (status != 200) throw StatusError("unexpected HTTP " + std::to_string(status), status);
    std::vector<std::uint8_t> body(res->body.begin(), res->body.end());
    if (!policy.cache_dir.empty()) write_file_bytes(policy.cache_dir / file_key(page_title), body);
    return body;
  }
}

std::string clean_text(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size();) {
    if (raw[i] == '[') {
      std::size_t j = i + 1;
      while (j < raw.size() && is_digit(raw[j])) ++j;
      if (j > i + 1 && j < raw.size() && raw[j] == ']') {
        i = j + 1;
        continue;
      }
      constexpr std::string_view kNeeded = "[citation needed]";
      if (raw.substr(i, kNeeded.size()) == kNeeded) {
        i += kNeeded.size();
        continue;
      }
    }
    if (raw[i] == '\xC2' && i + 1 < raw.size() && raw[i + 1] == '\xA0') {  // U+00A0
      s += ' ';
      i += 2;
      continue;
    }
    if (raw[i] == '<' || raw[i] == '>') {
      s += ' ';
      ++i;
      continue;
    }
    if (raw[i] == ']' && !s.empty() && is_digit(s.back())) {
      ++i;
      continue;
    }
    s += raw[i++];
  }
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      // "word ." left behind by stripped inline markup.
      if (!(c == '.' || c == ',' || c == ';' || c == ':')) out += ' ';
      pending_space = false;
    }
    out += c;
  }
  return out;
}

SpeciesInfo parse_species_page(std::span<const std::uint8_t> bytes, int species_id,
                               const std::string& species_name) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const html::Document doc = html::Document::parse(text);
  using html::Node;
  auto element = [](const Node& n) { return n.kind == Node::Kind::kElement; };

  int root = doc.find(doc.root(), [](const Node& n) { return n.attr("id") == "mw-content-text"; });
  if (root >= 0) {
    const int inner = doc.find(root, [](const Node& n) { return n.has_class("mw-parser-output"); });
    if (inner >= 0) root = inner;
  } else {
    root = doc.find(doc.root(), [](const Node& n) { return n.tag == "body"; });
    if (root < 0) root = doc.root();
  }

  std::vector<Block> blocks;
  doc.walk(root, [&](int id) {
    const Node& n = doc.node(id);
    if (!element(n) || id == root) return true;
    if (skip_block(n)) return false;
    if (const int level = heading_level(n)) {
      blocks.push_back({level, clean_text(doc.text(id, skip_inline))});
      return false;
    }
    if (n.tag == "p") {
      std::string t = clean_text(doc.text(id, skip_inline));
      if (!t.empty()) blocks.push_back({0, std::move(t)});
      return false;
    }
    return true;
  });

  SpeciesInfo info;
  info.species_id = species_id;
  info.species = species_name;
  for (const Block& b : blocks) {
    if (b.level != 0) break;
    info.summary = b.text;
    break;
  }
  if (info.summary.empty())
    for (const Block& b : blocks)
      if (b.level == 0) {
        info.summary = b.text;
        break;
      }
  if (info.summary.empty()) throw ParseError("document has no text paragraphs");
  info.habitat = section_text(blocks, "habitat");
  info.characteristics = section_text(blocks, "description");

  const int box = doc.find(doc.root(), [](const Node& n) { return n.tag == "table" && n.class_contains("infobox"); });
  if (box >= 0) {
    for (int tr : doc.find_all(box, [](const Node& n) { return n.tag == "tr"; })) {
      std::vector<int> cells;
      for (int c : doc.node(tr).children) {
        const Node& cn = doc.node(c);
        if (cn.tag == "th" || cn.tag == "td") cells.push_back(c);
      }
      if (cells.size() < 2) continue;
      std::string key = clean_text(doc.text(cells[0], skip_inline));
      while (!key.empty() && (key.back() == ':' || key.back() == ' ')) key.pop_back();
      std::string value;
      for (std::size_t i = 1; i < cells.size(); ++i) {
        const std::string part = clean_text(doc.text(cells[i], skip_inline));
        if (part.empty()) continue;
        if (!value.empty()) value += ' ';
        value += part;
      }
      if (!key.empty() && !value.empty()) info.infobox.emplace_back(std::move(key), std::move(value));
    }
  }

  const int h1 = doc.find(doc.root(), [](const Node& n) { return n.tag == "h1"; });
  if (h1 >= 0) info.page_title = clean_text(doc.text(h1, skip_inline));
  if (info.page_title.empty()) {
    const int title = doc.find(doc.root(), [](const Node& n) { return n.tag == "title"; });
    if (title >= 0) {
      info.page_title = clean_text(doc.text(title));
      const std::string suffix = " - Wikipedia";
      if (info.page_title.ends_with(suffix)) info.page_title.resize(info.page_title.size() - suffix.size());
    }
  }
  const int canonical = doc.find(doc.root(), [](const Node& n) {
    return n.tag == "link" && n.attr("rel") == "canonical";
  });
  if (canonical >= 0) info.source_url = clean_text(doc.node(canonical).attr("href"));
  return info;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

SpeciesInfo retrieve_species_info(int species_id, const std::string& species_name,
                                  const FetchPolicy& policy) {
  const std::string title = resolve_page(species_name, policy);
  const auto bytes = fetch_html(title, policy);
  SpeciesInfo info = parse_species_page(bytes, species_id, species_name);
  if (info.page_title.empty()) info.page_title = title;
  if (info.source_url.empty()) info.source_url = policy.base_url + wiki_path(title);
  info.fetched_at = utc_timestamp();
  return info;
}

}  // namespace asgir
