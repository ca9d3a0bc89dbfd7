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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asgir/geo.hpp"
#include "asgir/heads.hpp"

namespace asgir {

struct Split {
  std::vector<std::size_t> train;  // ascending item indices
  std::vector<std::size_t> test;
  std::vector<std::string> warnings;
};

// Stratified per class: floor(ratio * n) items to train (at least one on each
// side when n >= 2), the rest to test. Seeded, deterministic.
Split split(std::span<const int> labels, std::size_t n_classes, double ratio = 0.8,
            std::uint64_t seed = 0);

struct ConfusionMatrix {
  std::size_t n_classes = 0;
  std::vector<std::int64_t> counts;  // rows = true, cols = predicted

  std::int64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * n_classes + pred]; }
  std::int64_t total() const;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          std::size_t n_classes);

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct ClassReport {
  std::vector<ClassMetrics> classes;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double median_precision = 0.0, median_recall = 0.0, median_f1 = 0.0;
  double accuracy = 0.0;
  std::int64_t total = 0;
};

// Precision of a never-predicted class and recall of an absent class are 0.
ClassReport class_report(const ConfusionMatrix& cm, const LabelRegistry& registry);

nlohmann::ordered_json report_json(const ClassReport& report);
// Class / Precision / Recall / F1-Score / Support, two decimals.
std::string report_table(const ClassReport& report);

struct AblationRow {
  std::string model;  // "svm", "svm+region", ...
  HeadKind head = HeadKind::kSvm;
  bool masked = false;
  std::optional<std::string> error;
  double macro_f1 = 0.0, precision = 0.0, recall = 0.0, accuracy = 0.0;
};

struct AblationInput {
  const std::vector<std::vector<double>>* embeddings = nullptr;
  std::span<const int> labels;
  std::span<const std::optional<std::string>> regions;  // per item; may be empty
  const Split* split = nullptr;
  const LabelRegistry* registry = nullptr;
  const RegionIndex* region_index = nullptr;  // required for masked rows
};

struct AblationOptions {
  std::vector<HeadKind> heads = {HeadKind::kSvm};
  bool with_masking = false;
  SvmOptions svm;
  GmmOptions gmm;
};

// One row per (head, masking) pair over the shared embeddings and split.
// A failing row records its error and the remaining rows still run.
std::vector<AblationRow> run_ablation(const AblationInput& input, const AblationOptions& options);

std::string ablation_table(const std::vector<AblationRow>& rows);
nlohmann::ordered_json ablation_json(const std::vector<AblationRow>& rows);

}  // namespace asgir
