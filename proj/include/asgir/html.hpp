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

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace asgir::html {

struct Node {
  enum class Kind { kElement, kText };
  Kind kind = Kind::kElement;
  std::string tag;  // lowercase; empty for text and the document root
  std::vector<std::pair<std::string, std::string>> attrs;
  std::string text;  // entity-decoded, text nodes only
  int parent = -1;
  std::vector<int> children;

  std::string_view attr(std::string_view name) const;
  bool has_class(std::string_view cls) const;
  // True when any class token contains `fragment`.
  bool class_contains(std::string_view fragment) const;
};

// Error-recovering DOM. Never throws on malformed markup: stray end tags are
// dropped, unclosed elements close at end of input, and the usual implied
// end tags (p, li, tr, td/th, option) are applied. All traversal helpers are
// iterative so pathological nesting cannot exhaust the stack.
class Document {
 public:
  static Document parse(std::string_view input);

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  int root() const { return 0; }
  std::size_t size() const { return nodes_.size(); }

  // Pre-order walk below `from`. `visit` returns false to skip a subtree.
  void walk(int from, const std::function<bool(int)>& visit) const;
  // First element (pre-order) satisfying `pred`, or -1.
  int find(int from, const std::function<bool(const Node&)>& pred) const;
  std::vector<int> find_all(int from, const std::function<bool(const Node&)>& pred) const;

  // Concatenated descendant text. Block-level boundaries become spaces;
  // subtrees for which `skip` returns true are omitted.
  std::string text(int from, const std::function<bool(const Node&)>& skip = {}) const;

 private:
  std::vector<Node> nodes_;
};

// Decodes character references (&amp;, &#39;, &#x2013;, ...). Unknown
// named references are left verbatim.
std::string decode_entities(std::string_view s);

}  // namespace asgir::html
