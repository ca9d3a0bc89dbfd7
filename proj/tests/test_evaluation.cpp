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

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "asgir/error.hpp"
#include "asgir/evaluation.hpp"

using namespace asgir;

namespace {

LabelRegistry registry(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("Species-" + std::to_string(i));
  return LabelRegistry(names);
}

ConfusionMatrix matrix(std::size_t n, std::vector<std::int64_t> counts) {
  ConfusionMatrix cm;
  cm.n_classes = n;
  cm.counts = std::move(counts);
  return cm;
}

double brute_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

TEST_CASE("split: exact per-class ratio and determinism") {
  std::vector<int> labels(10, 0);
  const Split s = split(labels, 1, 0.8, 3);
  CHECK(s.train.size() == 8);
  CHECK(s.test.size() == 2);
  const Split again = split(labels, 1, 0.8, 3);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK(std::is_sorted(s.train.begin(), s.train.end()));
  CHECK(split(labels, 1, 0.8, 4).test != s.test);
}

TEST_CASE("split: singleton classes go to train with a warning") {
  const std::vector<int> labels = {0, 1, 1, 2, 2, 2};
  const Split s = split(labels, 3, 0.8, 0);
  CHECK(s.warnings.size() == 1);
  CHECK(std::find(s.train.begin(), s.train.end(), 0u) != s.train.end());
  // n = 2: one each side.
  CHECK(std::count_if(s.test.begin(), s.test.end(), [&](std::size_t i) { return labels[i] == 1; }) == 1);
  CHECK_THROWS_AS(split(std::vector<int>{}, 1), ArgumentError);
  CHECK_THROWS_AS(split(labels, 3, 1.0), ArgumentError);
  CHECK_THROWS_AS(split(labels, 2, 0.8), ArgumentError);
}

TEST_CASE("property: stratification is exact and the split is a partition") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t classes = 1 + rng() % 8;
    std::vector<int> labels(1 + rng() % 400);
    for (int& l : labels) l = static_cast<int>(rng() % classes);
    const double ratio = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    const Split s = split(labels, classes, ratio, trial);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (std::size_t i : s.test) CHECK(all.insert(i).second);
    CHECK(all.size() == labels.size());
    for (std::size_t c = 0; c < classes; ++c) {
      const auto n = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), static_cast<int>(c)));
      const auto tr = static_cast<std::size_t>(
          std::count_if(s.train.begin(), s.train.end(), [&](std::size_t i) { return labels[i] == static_cast<int>(c); }));
      if (n == 0) continue;
      if (n == 1) {
        CHECK(tr == 1);
        continue;
      }
      const auto want = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n))), 1, n - 1);
      CHECK(tr == want);
    }
  }
}

TEST_CASE("split at corpus scale stays within per-class flooring of 3884 / 971") {
  // 51 classes of uneven size summing to 4855.
  std::vector<int> labels;
  for (int c = 0; c < 51; ++c)
    for (int i = 0; i < 95 + (c < 10 ? 1 : 0); ++i) labels.push_back(c);
  REQUIRE(labels.size() == 4855);
  const Split s = split(labels, 51, 0.8, 0);
  CHECK(s.train.size() + s.test.size() == 4855);
  CHECK(std::abs(static_cast<long>(s.train.size()) - 3884) <= 51);
}

TEST_CASE("confusion matrix examples") {
  const auto cm = confusion(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 1, 1}, 2);
  CHECK(cm.counts == std::vector<std::int64_t>{1, 1, 0, 2});
  CHECK(cm.total() == 4);

  const auto diag = confusion(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}, 3);
  CHECK(diag.counts == std::vector<std::int64_t>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto col = confusion(std::vector<int>{0, 1, 2}, std::vector<int>{0, 0, 0}, 3);
  CHECK(col.counts == std::vector<std::int64_t>{1, 0, 0, 1, 0, 0, 1, 0, 0});

  CHECK_THROWS_AS(confusion(std::vector<int>{0}, std::vector<int>{0, 1}, 2), ArgumentError);
  CHECK_THROWS_AS(confusion(std::vector<int>{0}, std::vector<int>{5}, 2), ArgumentError);
}

TEST_CASE("hand confusion report") {
  const ClassReport r = class_report(matrix(2, {1, 1, 0, 2}), registry(2));
  CHECK(r.classes[0].precision == 1.0);
  CHECK(r.classes[0].recall == 0.5);
  CHECK(r.classes[0].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.classes[1].precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.classes[1].recall == 1.0);
  CHECK(r.classes[1].f1 == doctest::Approx(0.8));
  CHECK(r.accuracy == 0.75);
  CHECK(r.classes[0].support == 2);

  const ClassReport d = class_report(matrix(3, {4, 0, 0, 0, 2, 0, 0, 0, 7}), registry(3));
  CHECK(d.macro_f1 == 1.0);
  CHECK(d.median_precision == 1.0);
  CHECK(d.median_recall == 1.0);
  CHECK(d.median_f1 == 1.0);
  CHECK(d.accuracy == 1.0);

  CHECK_THROWS_AS(class_report(matrix(2, {1, 2, 3}), registry(2)), ArgumentError);
  CHECK_THROWS_AS(class_report(matrix(2, {1, 0, 0, 1}), registry(3)), ArgumentError);
}

TEST_CASE("property: report agrees with brute-force TP/FP/FN on 1000 random matrices") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 7;
    std::vector<std::int64_t> counts(n * n);
    for (auto& c : counts) c = rng() % 3 == 0 ? 0 : static_cast<std::int64_t>(rng() % 20);
    const auto cm = matrix(n, counts);
    const ClassReport r = class_report(cm, registry(n));
    std::int64_t total = 0, trace = 0, support = 0;
    std::vector<double> ps, rs, fs;
    for (std::size_t c = 0; c < n; ++c) {
      std::int64_t tp = counts[c * n + c], fp = 0, fn = 0;
      for (std::size_t k = 0; k < n; ++k) {
        total += counts[c * n + k];
        if (k != c) {
          fp += counts[k * n + c];
          fn += counts[c * n + k];
        }
      }
      trace += tp;
      const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
      const double rc = tp + fn ? double(tp) / double(tp + fn) : 0.0;
      const double f = p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
      ps.push_back(p);
      rs.push_back(rc);
      fs.push_back(f);
      const auto& m = r.classes[c];
      CHECK(m.precision == doctest::Approx(p).epsilon(1e-12));
      CHECK(m.recall == doctest::Approx(rc).epsilon(1e-12));
      CHECK(m.f1 == doctest::Approx(f).epsilon(1e-12));
      CHECK(m.support == tp + fn);
      support += m.support;
      for (double v : {m.precision, m.recall, m.f1}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
    CHECK(support == total);
    CHECK(r.total == total);
    CHECK(r.accuracy == (total ? double(trace) / double(total) : 0.0));
    double mp = 0, mr = 0, mf = 0;
    for (std::size_t c = 0; c < n; ++c) {
      mp += ps[c] / double(n);
      mr += rs[c] / double(n);
      mf += fs[c] / double(n);
    }
    CHECK(r.macro_precision == doctest::Approx(mp).epsilon(1e-12));
    CHECK(r.macro_recall == doctest::Approx(mr).epsilon(1e-12));
    CHECK(r.macro_f1 == doctest::Approx(mf).epsilon(1e-12));
    CHECK(r.median_precision == doctest::Approx(brute_median(ps)).epsilon(1e-12));
    CHECK(r.median_recall == doctest::Approx(brute_median(rs)).epsilon(1e-12));
    CHECK(r.median_f1 == doctest::Approx(brute_median(fs)).epsilon(1e-12));
  }
}

TEST_CASE("report table and JSON shapes") {
  const LabelRegistry reg({"Barn-Swallow", "Eurasian-Wren"});
  const ClassReport r = class_report(matrix(2, {22, 0, 0, 5}), reg);
  const std::string table = report_table(r);
  CHECK(table.rfind("Class", 0) == 0);
  CHECK(table.find("Precision  Recall  F1-Score  Support") != std::string::npos);
  // Each class row: name, three two-decimal metrics, support.
  const auto row = table.substr(table.find("Barn-Swallow"));
  std::istringstream fields(row.substr(0, row.find('\n')));
  std::string name, p, rc, f;
  long support = 0;
  fields >> name >> p >> rc >> f >> support;
  CHECK(name == "Barn-Swallow");
  CHECK(p == "1.00");
  CHECK(rc == "1.00");
  CHECK(f == "1.00");
  CHECK(support == 22);

  const auto j = report_json(r);
  CHECK(j.at("classes").size() == 2);
  CHECK(j.at("classes")[0].at("name") == "Barn-Swallow");
  CHECK(j.at("classes")[0].at("support") == 22);
  for (const char* key : {"precision", "recall", "f1"}) {
    CHECK(j.at("macro").contains(key));
    CHECK(j.at("medians").contains(key));
  }
  CHECK(j.at("accuracy") == 1.0);
}

TEST_CASE("ablation rows over shared embeddings") {
  // Three separable classes in 2-D, regions that each contain the true label.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.2);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::vector<std::optional<std::string>> regions;
  const double cx[3] = {0.0, 2.5, 5.0};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 40; ++i) {
      x.push_back({cx[c] + g(rng), g(rng)});
      y.push_back(c);
      regions.push_back(c == 1 ? std::optional<std::string>("mid") : std::optional<std::string>("edge"));
    }
  const LabelRegistry reg = registry(3);
  const RegionIndex idx = load_region_index(
      "region,species\nmid,Species-1\nmid,Species-0\nedge,Species-0\nedge,Species-2\n", reg);
  const Split s = split(y, 3, 0.8, 1);

  AblationInput in;
  in.embeddings = &x;
  in.labels = y;
  in.regions = regions;
  in.split = &s;
  in.registry = &reg;
  in.region_index = &idx;

  AblationOptions opt;
  opt.heads = {HeadKind::kSvm, HeadKind::kGmm};
  opt.with_masking = true;
  const auto rows = run_ablation(in, opt);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].model == "svm");
  CHECK(rows[1].model == "svm+region");
  CHECK(rows[2].model == "gmm");
  CHECK(rows[3].model == "gmm+region");
  for (const auto& r : rows) {
    CHECK_FALSE(r.error.has_value());
    for (double v : {r.macro_f1, r.precision, r.recall, r.accuracy}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(rows[1].accuracy >= rows[0].accuracy);
  CHECK(rows[3].accuracy >= rows[2].accuracy);

  const auto j = ablation_json(rows);
  CHECK(j.size() == 4);
  CHECK(j[1].at("region_masking") == true);
  CHECK(ablation_table(rows).find("svm+region") != std::string::npos);

  // A failing head records its error and the rest still run.
  AblationOptions bad = opt;
  bad.gmm.k = 1000;
  const auto mixed = run_ablation(in, bad);
  REQUIRE(mixed.size() == 4);
  CHECK_FALSE(mixed[0].error.has_value());
  CHECK(mixed[2].error.has_value());
  CHECK(mixed[3].error.has_value());
  CHECK(ablation_table(mixed).find("failed") != std::string::npos);
  CHECK(ablation_json(mixed)[2].contains("error"));

  AblationInput unmasked = in;
  unmasked.region_index = nullptr;
  const auto no_index = run_ablation(unmasked, opt);
  CHECK_FALSE(no_index[0].error.has_value());
  CHECK(no_index[1].error.has_value());
}
