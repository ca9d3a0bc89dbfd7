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

#include "asgir/html.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

namespace asgir::html {
namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

const std::unordered_set<std::string_view> kVoid = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr"};

const std::unordered_set<std::string_view> kRawText = {"script", "style", "textarea", "title",
                                                       "xmp", "noscript"};

// Elements whose start implicitly closes an open <p>.
const std::unordered_set<std::string_view> kClosesP = {
    "address", "article", "aside", "blockquote", "div", "dl", "fieldset", "figure",
    "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "main",
    "nav", "ol", "p", "pre", "section", "table", "ul"};

const std::unordered_set<std::string_view> kBlock = {
    "address", "article", "aside", "blockquote", "br", "caption", "dd", "div", "dl", "dt",
    "figcaption", "figure", "footer", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr",
    "li", "main", "nav", "ol", "p", "pre", "section", "table", "tbody", "td", "tfoot",
    "th", "thead", "tr", "ul"};

const std::unordered_map<std::string_view, std::string_view> kNamed = {
    {"amp", "&"},      {"lt", "<"},       {"gt", ">"},        {"quot", "\""},
    {"apos", "'"},     {"nbsp", " "},     {"ndash", "–"}, {"mdash", "—"},
    {"hellip", "…"}, {"deg", "°"}, {"times", "×"}, {"minus", "−"},
    {"lsquo", "‘"}, {"rsquo", "’"}, {"ldquo", "“"}, {"rdquo", "”"},
    {"thinsp", " "},   {"ensp", " "},     {"emsp", " "},      {"shy", ""},
    {"zwj", ""},       {"zwnj", ""},      {"copy", "©"},  {"middot", "·"}};

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

class Builder {
 public:
  explicit Builder(std::vector<Node>& nodes) : nodes_(nodes) {
    nodes_.push_back(Node{});
    stack_.push_back(0);
  }

  void text(std::string_view raw, bool decode) {
    if (raw.empty()) return;
    std::string t = decode ? decode_entities(raw) : std::string(raw);
    const int parent = stack_.back();
    auto& siblings = nodes_[static_cast<std::size_t>(parent)].children;
    if (!siblings.empty() && nodes_[static_cast<std::size_t>(siblings.back())].kind == Node::Kind::kText) {
      nodes_[static_cast<std::size_t>(siblings.back())].text += t;
      return;
    }
    Node n;
    n.kind = Node::Kind::kText;
    n.text = std::move(t);
    append(std::move(n));
  }

  int open(std::string tag, std::vector<std::pair<std::string, std::string>> attrs, bool self_closing) {
    apply_implied_ends(tag);
    Node n;
    n.tag = std::move(tag);
    n.attrs = std::move(attrs);
    const bool is_void = kVoid.count(n.tag) != 0;
    const int id = append(std::move(n));
    if (!is_void && !self_closing) stack_.push_back(id);
    return id;
  }

  void close(std::string_view tag) {
    for (std::size_t i = stack_.size(); i-- > 1;) {
      if (nodes_[static_cast<std::size_t>(stack_[i])].tag == tag) {
        stack_.resize(i);
        return;
      }
    }
  }

 private:
  int append(Node n) {
    const int parent = stack_.back();
    n.parent = parent;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(n));
    nodes_[static_cast<std::size_t>(parent)].children.push_back(id);
    return id;
  }

  const std::string& top() const { return nodes_[static_cast<std::size_t>(stack_.back())].tag; }

  // Closes the nearest open `tag` unless a boundary element is found first.
  void close_within(std::string_view tag, std::initializer_list<std::string_view> boundaries) {
    for (std::size_t i = stack_.size(); i-- > 1;) {
      const std::string& t = nodes_[static_cast<std::size_t>(stack_[i])].tag;
      if (t == tag) {
        stack_.resize(i);
        return;
      }
      for (auto b : boundaries)
        if (t == b) return;
    }
  }

  void apply_implied_ends(const std::string& tag) {
    if (kClosesP.count(tag)) close_within("p", {"table", "td", "th", "li", "div", "blockquote"});
    if (tag == "li") close_within("li", {"ul", "ol"});
    if (tag == "dt" || tag == "dd") {
      close_within("dt", {"dl"});
      close_within("dd", {"dl"});
    }
    if (tag == "tr") {
      close_within("td", {"table", "tr"});
      close_within("th", {"table", "tr"});
      close_within("tr", {"table"});
    }
    if (tag == "td" || tag == "th") {
      close_within("td", {"table", "tr"});
      close_within("th", {"table", "tr"});
    }
    if (tag == "option") close_within("option", {"select"});
  }

  std::vector<Node>& nodes_;
  std::vector<int> stack_;
};

bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == ':' || c == '_';
}

// Case-insensitive search for `</tag` starting at `from`.
std::size_t find_close_tag(std::string_view in, std::size_t from, std::string_view tag) {
  for (std::size_t i = from; i + 2 + tag.size() <= in.size(); ++i) {
    if (in[i] != '<' || in[i + 1] != '/') continue;
    bool ok = true;
    for (std::size_t k = 0; k < tag.size() && ok; ++k) ok = lower(in[i + 2 + k]) == tag[k];
    if (ok) return i;
  }
  return std::string_view::npos;
}

}  // namespace

std::string_view Node::attr(std::string_view name) const {
  for (const auto& [k, v] : attrs)
    if (k == name) return v;
  return {};
}

bool Node::has_class(std::string_view cls) const {
  std::string_view all = attr("class");
  while (!all.empty()) {
    while (!all.empty() && is_space(all.front())) all.remove_prefix(1);
    std::size_t end = 0;
    while (end < all.size() && !is_space(all[end])) ++end;
    if (all.substr(0, end) == cls) return true;
    all.remove_prefix(end);
  }
  return false;
}

bool Node::class_contains(std::string_view fragment) const {
  return attr("class").find(fragment) != std::string_view::npos;
}

std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] != '&') {
      out += s[i++];
      continue;
    }
    const std::size_t semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 32) {
      out += s[i++];
      continue;
    }
    const std::string_view ref = s.substr(i + 1, semi - i - 1);
    if (!ref.empty() && ref[0] == '#') {
      std::uint32_t cp = 0;
      bool ok = ref.size() > 1;
      const bool hex = ok && (ref[1] == 'x' || ref[1] == 'X');
      const std::string_view digits = ref.substr(hex ? 2 : 1);
      ok = ok && !digits.empty() && digits.size() <= 8;
      for (char c : digits) {
        if (!ok) break;
        int v;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
        else {
          ok = false;
          break;
        }
        cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
      }
      if (ok) {
        append_utf8(out, cp);
        i = semi + 1;
        continue;
      }
    } else if (auto it = kNamed.find(ref); it != kNamed.end()) {
      out += it->second;
      i = semi + 1;
      continue;
    }
    out += s[i++];
  }
  return out;
}

Document Document::parse(std::string_view in) {
  Document doc;
  Builder b(doc.nodes_);
  std::size_t i = 0;
  std::size_t text_start = 0;
  auto flush_text = [&](std::size_t end) {
    if (end > text_start) b.text(in.substr(text_start, end - text_start), true);
  };
  while (i < in.size()) {
    if (in[i] != '<') {
      ++i;
      continue;
    }
    // Comments, doctype, processing instructions.
    if (in.compare(i, 4, "<!--") == 0) {
      flush_text(i);
      const std::size_t end = in.find("-->", i + 4);
      i = end == std::string_view::npos ? in.size() : end + 3;
      text_start = i;
      continue;
    }
    if (i + 1 < in.size() && (in[i + 1] == '!' || in[i + 1] == '?')) {
      flush_text(i);
      const std::size_t end = in.find('>', i + 2);
      i = end == std::string_view::npos ? in.size() : end + 1;
      text_start = i;
      continue;
    }
    const bool closing = i + 1 < in.size() && in[i + 1] == '/';
    const std::size_t name_at = i + (closing ? 2 : 1);
    if (name_at >= in.size() || !is_alpha(in[name_at])) {
      ++i;  // literal '<'
      continue;
    }
    flush_text(i);
    std::size_t p = name_at;
    std::string tag;
    while (p < in.size() && name_char(in[p])) tag += lower(in[p++]);

    if (closing) {
      const std::size_t end = in.find('>', p);
      i = end == std::string_view::npos ? in.size() : end + 1;
      text_start = i;
      b.close(tag);
      continue;
    }

    std::vector<std::pair<std::string, std::string>> attrs;
    bool self_closing = false;
    while (p < in.size() && in[p] != '>') {
      if (is_space(in[p])) {
        ++p;
        continue;
      }
      if (in[p] == '/') {
        self_closing = p + 1 < in.size() && in[p + 1] == '>';
        ++p;
        continue;
      }
      std::string name;
      while (p < in.size() && !is_space(in[p]) && in[p] != '>' && in[p] != '=' &&
             !(in[p] == '/' && p + 1 < in.size() && in[p + 1] == '>'))
        name += lower(in[p++]);
      if (name.empty()) {
        ++p;  // stray '='
        continue;
      }
      while (p < in.size() && is_space(in[p])) ++p;
      std::string value;
      if (p < in.size() && in[p] == '=') {
        ++p;
        while (p < in.size() && is_space(in[p])) ++p;
        if (p < in.size() && (in[p] == '"' || in[p] == '\'')) {
          const char q = in[p++];
          const std::size_t end = in.find(q, p);
          const std::size_t stop = end == std::string_view::npos ? in.size() : end;
          value = decode_entities(in.substr(p, stop - p));
          p = end == std::string_view::npos ? in.size() : end + 1;
        } else {
          const std::size_t start = p;
          while (p < in.size() && !is_space(in[p]) && in[p] != '>') ++p;
          value = decode_entities(in.substr(start, p - start));
        }
      }
      attrs.emplace_back(std::move(name), std::move(value));
    }
    i = p < in.size() ? p + 1 : in.size();
    b.open(tag, std::move(attrs), self_closing);
    if (!self_closing && kRawText.count(tag)) {
      const std::size_t end = find_close_tag(in, i, tag);
      const std::size_t stop = end == std::string_view::npos ? in.size() : end;
      b.text(in.substr(i, stop - i), tag == "title" || tag == "textarea");
      b.close(tag);
      if (end == std::string_view::npos) {
        i = in.size();
      } else {
        const std::size_t gt = in.find('>', end);
        i = gt == std::string_view::npos ? in.size() : gt + 1;
      }
    }
    text_start = i;
  }
  flush_text(in.size());
  return doc;
}

void Document::walk(int from, const std::function<bool(int)>& visit) const {
  std::vector<int> stack = {from};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (!visit(id)) continue;
    const auto& ch = node(id).children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
}

int Document::find(int from, const std::function<bool(const Node&)>& pred) const {
  int found = -1;
  walk(from, [&](int id) {
    if (found >= 0) return false;
    const Node& n = node(id);
    if (n.kind == Node::Kind::kElement && id != from && pred(n)) {
      found = id;
      return false;
    }
    return true;
  });
  return found;
}

std::vector<int> Document::find_all(int from, const std::function<bool(const Node&)>& pred) const {
  std::vector<int> out;
  walk(from, [&](int id) {
    const Node& n = node(id);
    if (n.kind == Node::Kind::kElement && id != from && pred(n)) out.push_back(id);
    return true;
  });
  return out;
}

std::string Document::text(int from, const std::function<bool(const Node&)>& skip) const {
  std::string out;
  // Negative entries mark "leave element" so block ends can emit a space.
  std::vector<int> stack = {from};
  while (!stack.empty()) {
    const int raw = stack.back();
    stack.pop_back();
    if (raw < 0) {
      out += ' ';
      continue;
    }
    const Node& n = node(raw);
    if (n.kind == Node::Kind::kText) {
      out += n.text;
      continue;
    }
    if (raw != from && skip && skip(n)) continue;
    if (kRawText.count(n.tag) && n.tag != "title") continue;
    const bool block = kBlock.count(n.tag) != 0;
    if (block) {
      out += ' ';
      stack.push_back(-1);
    }
    for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

}  // namespace asgir::html
