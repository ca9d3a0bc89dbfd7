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

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace asgir {

// Bijection between class ids [0, n) and canonical species names.
class LabelRegistry {
 public:
  LabelRegistry() = default;
  // Throws ArgumentError on duplicate or empty names.
  explicit LabelRegistry(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(int id) const;
  std::optional<int> find(std::string_view name) const;
  int id(std::string_view name) const;  // throws UnknownSpeciesError
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const LabelRegistry& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int, std::less<>> index_;
};

// One real per class; higher is more likely. Masked entries are -inf.
using ScoreVector = std::vector<double>;

// First maximal entry, so ties go to the lowest class id.
int argmax(std::span<const double> scores);

struct SvmOptions {
  double C = 1.0;
  double tol = 1e-4;
  int max_iter = 1000;
  std::uint64_t seed = 0;
  bool standardize = false;
};

struct SvmModel {
  LabelRegistry labels;
  std::vector<double> weights;  // n_classes x dim, row-major
  std::vector<double> biases;
  std::size_t dim = 0;
  double C = 1.0;

  ScoreVector score(std::span<const double> embedding) const;
  std::span<const double> row(int c) const { return {weights.data() + c * dim, dim}; }
};

struct SvmTrainStats {
  std::vector<int> epochs;           // per class
  std::vector<double> final_gap;     // projected-gradient spread at exit
  std::vector<double> hinge_loss;    // per class, sum over training points
};

// One-vs-rest L1-loss linear SVMs fit by dual coordinate descent. The bias
// is learned as the weight of a constant feature.
SvmModel svm_train(const std::vector<std::vector<double>>& embeddings,
                   std::span<const int> labels, const LabelRegistry& registry,
                   const SvmOptions& options = {}, SvmTrainStats* stats = nullptr);

struct GmmOptions {
  int k = 1;
  int max_em_iter = 100;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

inline constexpr double kVarianceFloor = 1e-6;

struct GmmClass {
  std::vector<double> means;      // k x dim
  std::vector<double> variances;  // k x dim
  std::vector<double> weights;    // k
  double log_prior = 0.0;
};

struct GmmModel {
  LabelRegistry labels;
  std::size_t dim = 0;
  int k = 1;
  std::vector<GmmClass> classes;

  ScoreVector score(std::span<const double> embedding) const;
  // log p(e | class c), log-sum-exp over the components.
  double class_log_likelihood(int c, std::span<const double> embedding) const;
};

struct GmmTrainStats {
  // Per class: total data log-likelihood after each E-step.
  std::vector<std::vector<double>> log_likelihood;
};

// Diagonal-covariance EM per class; priors are empirical class frequencies.
GmmModel gmm_train(const std::vector<std::vector<double>>& embeddings,
                   std::span<const int> labels, const LabelRegistry& registry,
                   const GmmOptions& options = {}, GmmTrainStats* stats = nullptr);

using HeadModel = std::variant<SvmModel, GmmModel>;

enum class HeadKind : std::uint8_t { kSvm = 0, kGmm = 1 };

HeadKind head_kind(const HeadModel& head);
std::string head_name(HeadKind kind);
HeadKind parse_head_kind(std::string_view name);  // "svm" | "gmm"
ScoreVector score(const HeadModel& head, std::span<const double> embedding);
const LabelRegistry& labels_of(const HeadModel& head);

// A persisted head plus free-form string metadata (front-end normalization,
// encoder identity, ...).
struct ModelFile {
  HeadModel head;
  std::map<std::string, std::string> meta;
};

// ASGM container. Parameters are written as float32, so a model loaded from
// disk re-serializes to identical bytes.
std::vector<std::uint8_t> save_model(const ModelFile& model);
ModelFile load_model(std::span<const std::uint8_t> bytes);
inline constexpr std::uint32_t kModelVersion = 1;

}  // namespace asgir
