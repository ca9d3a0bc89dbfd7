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

#include "asgir/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "asgir/error.hpp"

namespace asgir {
namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Split split(std::span<const int> labels, std::size_t n_classes, double ratio, std::uint64_t seed) {
  if (labels.empty()) throw ArgumentError("split: no items");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ArgumentError("split: ratio must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes)
      throw ArgumentError("split: label outside [0, n_classes)");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  Split out;
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto& items = by_class[c];
    if (items.empty()) continue;
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng() % i]);
    const std::size_t n = items.size();
    std::size_t n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
    if (n == 1) {
      n_train = 1;
      out.warnings.push_back("class " + std::to_string(c) + " has a single item; assigned to train");
    } else {
      n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    }
    out.train.insert(out.train.end(), items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          std::size_t n_classes) {
  if (truth.size() != predicted.size())
    throw ArgumentError("confusion: true and predicted label counts differ");
  ConfusionMatrix cm;
  cm.n_classes = n_classes;
  cm.counts.assign(n_classes * n_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= n_classes ||
        static_cast<std::size_t>(predicted[i]) >= n_classes)
      throw ArgumentError("confusion: label outside [0, n_classes)");
    ++cm.counts[static_cast<std::size_t>(truth[i]) * n_classes + static_cast<std::size_t>(predicted[i])];
  }
  return cm;
}

ClassReport class_report(const ConfusionMatrix& cm, const LabelRegistry& registry) {
  const std::size_t n = cm.n_classes;
  if (cm.counts.size() != n * n) throw ArgumentError("class_report: malformed confusion matrix");
  if (registry.size() != n) throw ArgumentError("class_report: registry size does not match matrix");
  ClassReport r;
  std::vector<double> ps, rs, fs;
  std::int64_t trace = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::int64_t row = 0, col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const std::int64_t tp = cm.at(c, c);
    trace += tp;
    ClassMetrics m;
    m.name = registry.name(static_cast<int>(c));
    m.support = row;
    m.precision = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    m.recall = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    ps.push_back(m.precision);
    rs.push_back(m.recall);
    fs.push_back(m.f1);
    r.classes.push_back(std::move(m));
  }
  r.total = cm.total();
  r.accuracy = r.total ? static_cast<double>(trace) / static_cast<double>(r.total) : 0.0;
  r.macro_precision = mean(ps);
  r.macro_recall = mean(rs);
  r.macro_f1 = mean(fs);
  r.median_precision = median(ps);
  r.median_recall = median(rs);
  r.median_f1 = median(fs);
  return r;
}

nlohmann::ordered_json report_json(const ClassReport& r) {
  nlohmann::ordered_json j;
  auto classes = nlohmann::ordered_json::array();
  for (const auto& c : r.classes)
    classes.push_back({{"name", c.name},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1},
                       {"support", c.support}});
  j["classes"] = std::move(classes);
  j["macro"] = {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}};
  j["medians"] = {{"precision", r.median_precision}, {"recall", r.median_recall}, {"f1", r.median_f1}};
  j["accuracy"] = r.accuracy;
  j["total"] = r.total;
  return j;
}

std::string report_table(const ClassReport& r) {
  std::size_t width = 5;
  for (const auto& c : r.classes) width = std::max(width, c.name.size());
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size() + 2, ' '); };
  std::string out = pad("Class") + "Precision  Recall  F1-Score  Support\n";
  for (const auto& c : r.classes) {
    char row[96];
    std::snprintf(row, sizeof row, "%9s  %6s  %8s  %7lld\n", fixed(c.precision, 2).c_str(),
                  fixed(c.recall, 2).c_str(), fixed(c.f1, 2).c_str(), static_cast<long long>(c.support));
    out += pad(c.name) + row;
  }
  char tail[160];
  std::snprintf(tail, sizeof tail, "\nmacro   P=%.3f R=%.3f F1=%.3f\nmedian  P=%.3f R=%.3f F1=%.3f\naccuracy %.3f (%lld items)\n",
                r.macro_precision, r.macro_recall, r.macro_f1, r.median_precision, r.median_recall,
                r.median_f1, r.accuracy, static_cast<long long>(r.total));
  return out + tail;
}

std::vector<AblationRow> run_ablation(const AblationInput& in, const AblationOptions& opt) {
  if (!in.embeddings || !in.split || !in.registry) throw ArgumentError("run_ablation: incomplete input");
  const auto& x = *in.embeddings;
  if (x.size() != in.labels.size()) throw ArgumentError("run_ablation: embeddings/labels length mismatch");

  std::vector<std::vector<double>> train_x;
  std::vector<int> train_y;
  for (std::size_t i : in.split->train) {
    train_x.push_back(x[i]);
    train_y.push_back(in.labels[i]);
  }
  std::vector<int> truth;
  for (std::size_t i : in.split->test) truth.push_back(in.labels[i]);

  std::vector<AblationRow> rows;
  for (HeadKind kind : opt.heads) {
    std::vector<bool> states = {false};
    if (opt.with_masking) states.push_back(true);
    std::optional<HeadModel> head;
    std::string train_error;
    try {
      if (kind == HeadKind::kSvm) head = svm_train(train_x, train_y, *in.registry, opt.svm);
      else head = gmm_train(train_x, train_y, *in.registry, opt.gmm);
    } catch (const std::exception& e) {
      train_error = e.what();
    }
    for (bool masked : states) {
      AblationRow row;
      row.head = kind;
      row.masked = masked;
      row.model = head_name(kind) + (masked ? "+region" : "");
      if (!head) {
        row.error = train_error;
        rows.push_back(std::move(row));
        continue;
      }
      try {
        if (masked && !in.region_index) throw ArgumentError("masked row requested without a region index");
        std::vector<int> pred;
        for (std::size_t i : in.split->test) {
          ScoreVector s = score(*head, x[i]);
          if (masked && i < in.regions.size() && in.regions[i])
            s = mask_scores(s, in.regions[i], *in.region_index);
          pred.push_back(argmax(s));
        }
        const ClassReport rep = class_report(confusion(truth, pred, in.registry->size()), *in.registry);
        row.macro_f1 = rep.macro_f1;
        row.precision = rep.macro_precision;
        row.recall = rep.macro_recall;
        row.accuracy = rep.accuracy;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = "Model        F1-Score Macro  Precision  Recall  Accuracy\n";
  for (const auto& r : rows) {
    char line[160];
    if (r.error) {
      std::snprintf(line, sizeof line, "%-12s failed: %s\n", r.model.c_str(), r.error->c_str());
    } else {
      std::snprintf(line, sizeof line, "%-12s %14.3f  %9.3f  %6.3f  %8.3f\n", r.model.c_str(), r.macro_f1,
                    r.precision, r.recall, r.accuracy);
    }
    out += line;
  }
  return out;
}

nlohmann::ordered_json ablation_json(const std::vector<AblationRow>& rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    j["head"] = head_name(r.head);
    j["region_masking"] = r.masked;
    if (r.error) {
      j["error"] = *r.error;
    } else {
      j["f1_macro"] = r.macro_f1;
      j["precision"] = r.precision;
      j["recall"] = r.recall;
      j["accuracy"] = r.accuracy;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace asgir
