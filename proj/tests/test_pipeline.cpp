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

#include <algorithm>
#include <tuple>
#include <random>

#include "asgir/error.hpp"
#include "asgir/pipeline.hpp"
#include "asgir/util.hpp"
#include "support/test_support.hpp"

using namespace asgir;

namespace {

// Small encoder so the end-to-end cases stay quick.
EncoderConfig small_encoder() {
  EncoderConfig c;
  c.embed_dim = 24;
  c.n_heads = 2;
  c.n_layers = 1;
  c.stride_h = 16;
  c.stride_w = 16;
  return c;
}

struct Fixture {
  testing::TempDir dir;
  testing::ToneCorpus tones;
  Corpus corpus;
  TrainResult trained;

  Fixture() {
    tones = testing::write_tone_corpus(dir.path(), {500.0, 1500.0, 3000.0}, 3, 3, 20.0, 7, {"low", "mid", "high"});
    corpus = load_corpus(load_manifest(tones.manifest), nullptr, 1);
    TrainOptions opt;
    opt.encoder = small_encoder();
    opt.seed = 11;
    opt.threads = 1;
    trained = train_pipeline(corpus, opt);
  }
};

// Majority oracle: rank every class by (votes, summed score, -id).
int vote_oracle(const std::vector<int>& preds, const std::vector<ScoreVector>& scores) {
  const int k = static_cast<int>(scores.front().size());
  std::vector<std::tuple<int, double, int>> keys;
  for (int c = 0; c < k; ++c) {
    const int votes = static_cast<int>(std::count(preds.begin(), preds.end(), c));
    if (votes == 0) continue;
    double sum = 0.0;
    for (const auto& s : scores) sum += s[static_cast<std::size_t>(c)];
    keys.emplace_back(votes, sum, -c);
  }
  return -std::get<2>(*std::max_element(keys.begin(), keys.end()));
}

}  // namespace

TEST_CASE("property: majority vote equals the recomputed mode with summed-score tie-break") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t classes = 1 + rng() % 5;
    const std::size_t segs = 1 + rng() % 9;
    std::vector<ScoreVector> scores(segs, ScoreVector(classes));
    std::vector<int> preds;
    for (auto& s : scores) {
      for (double& v : s) v = trial % 3 == 0 ? static_cast<double>(rng() % 3) : g(rng);
      preds.push_back(argmax(s));
    }
    const int got = majority_vote(preds, scores);
    CHECK(got == vote_oracle(preds, scores));
    // The winner is always a mode.
    const auto n = std::count(preds.begin(), preds.end(), got);
    for (int p : preds) CHECK(std::count(preds.begin(), preds.end(), p) <= n);
  }
  // Explicit tie: two votes each, class 2 has the larger summed score.
  const std::vector<ScoreVector> s = {{1.0, 0.0, 0.9}, {1.0, 0.0, 0.5}, {0.0, 0.0, 2.0}, {0.1, 0.0, 3.0}};
  CHECK(majority_vote(std::vector<int>{0, 0, 2, 2}, s) == 2);
  // Equal sums: lower id.
  const std::vector<ScoreVector> eq = {{1.0, 0.0}, {0.0, 1.0}};
  CHECK(majority_vote(std::vector<int>{0, 1}, eq) == 0);
  CHECK_THROWS_AS(majority_vote(std::vector<int>{}, std::vector<ScoreVector>{}), ArgumentError);
}

TEST_CASE("encoder config string round trip") {
  EncoderConfig c = small_encoder();
  c.pooling = Pooling::kClsToken;
  const std::string s = encoder_config_string(c);
  CHECK(parse_encoder_config(s) == c);
  CHECK(encoder_config_string(EncoderConfig{}) ==
        "patch_h=16,patch_w=16,stride_h=10,stride_w=10,embed_dim=192,n_layers=3,n_heads=3,mlp_ratio=4,"
        "pooling=mean,input_frames=200,input_bins=128");
  CHECK_THROWS(parse_encoder_config("patch_h=x"));
  CHECK_THROWS(parse_encoder_config("bogus=1"));
}

TEST_CASE("corpus loading, normalization and embeddings") {
  Fixture f;
  CHECK(f.corpus.registry.names() == std::vector<std::string>{"Tone-1500", "Tone-3000", "Tone-500"});
  CHECK(f.corpus.segments.size() == 27);
  CHECK(f.corpus.labels.size() == 27);
  CHECK(f.corpus.regions.at(0) == std::optional<std::string>("low"));
  CHECK(f.corpus.segments[1].offset_s == 2.0);

  // Normalization is fitted on the train side only.
  const auto [mean, std] = normalization_stats(f.corpus.segments, f.trained.split.train, SpectrogramConfig{}, 1);
  CHECK(std::stod(f.trained.model.meta.at(meta::kNormMean)) == mean);
  CHECK(std::stod(f.trained.model.meta.at(meta::kNormStd)) == std);
  CHECK(std > 0.0);

  // Normalized train spectrograms have roughly zero mean, unit spread.
  SpectrogramConfig fitted;
  fitted.norm_mean = mean;
  fitted.norm_std = std;
  NormAccumulator acc;
  for (std::size_t i : f.trained.split.train) acc.add(log_mel(f.corpus.segments[i], fitted).values);
  CHECK(std::abs(acc.mean()) < 1e-6);
  CHECK(acc.stddev() == doctest::Approx(1.0).epsilon(1e-6));

  CHECK(f.trained.embeddings.size() == 27);
  for (const auto& e : f.trained.embeddings) CHECK(e.size() == 24);
}

TEST_CASE("thread count never changes embeddings") {
  Fixture f;
  const EncoderConfig enc = small_encoder();
  const FeatureExtractor fx(SpectrogramConfig{}, enc, random_weights(enc, 3));
  const auto one = fx.embed_all(f.corpus.segments, 1);
  const auto four = fx.embed_all(f.corpus.segments, 4);
  CHECK(one == four);
  CHECK(fx.embed(f.corpus.segments[4]).segment_ref == f.corpus.segments[4].parent_id + "@2");
}

TEST_CASE("embedding cache stores and reloads identical rows") {
  Fixture f;
  testing::TempDir cache;
  const EncoderConfig enc = small_encoder();
  const FeatureExtractor fx(SpectrogramConfig{}, enc, random_weights(enc, 3));
  const auto first = embed_corpus(fx, f.corpus.segments, cache.path(), 1);
  std::size_t files = 0;
  for (auto& e : std::filesystem::directory_iterator(cache.path())) files += e.path().extension() == ".emb";
  CHECK(files == 1);
  const EmbeddingCache c(cache.path());
  const auto key = c.key(fx, f.corpus.segments);
  const auto hit = c.load(key);
  REQUIRE(hit.has_value());
  CHECK(*hit == first);
  CHECK(embed_corpus(fx, f.corpus.segments, cache.path(), 1) == first);

  // Different weights, different key.
  const FeatureExtractor other(SpectrogramConfig{}, enc, random_weights(enc, 4));
  CHECK(c.key(other, f.corpus.segments) != key);
  // Different content, different key.
  CHECK(c.key(fx, std::span(f.corpus.segments).subspan(1)) != key);

  // A corrupt file is a miss.
  write_file_bytes(cache.path() / (key + ".emb"), std::vector<std::uint8_t>{1, 2, 3});
  CHECK_FALSE(c.load(key).has_value());
  CHECK_FALSE(c.load("nonexistent").has_value());
}

TEST_CASE("trained model classifies its own tones; metadata rebuilds the encoder") {
  Fixture f;
  CHECK(f.trained.report.accuracy >= 0.8);
  const auto& meta = f.trained.model.meta;
  CHECK(meta.at(meta::kEncoderConfig) == encoder_config_string(small_encoder()));
  CHECK(meta.at(meta::kEncoderSeed) == "11");

  const ModelFile reloaded = load_model(save_model(f.trained.model));
  const Classifier clf = Classifier::from_model(reloaded);
  CHECK(clf.labels() == f.corpus.registry);
  CHECK(clf.features().weights_hash() == weights_hash(small_encoder(), random_weights(small_encoder(), 11)));

  std::mt19937_64 rng(77);
  const int id_500 = *f.corpus.registry.find("Tone-500");
  const auto clip = testing::clip_of(testing::noisy_tone(500.0, 6.5, 16000, 20.0, rng));
  const auto r = clf.classify(clip, std::nullopt, nullptr);
  CHECK(r.segments.size() == 3);
  CHECK(r.top_label == id_500);
  CHECK_FALSE(r.unconstrained_top1.has_value());
  CHECK(r.segments[2].offset_s == 4.0);

  const auto j = classify_response(r, clf.labels());
  CHECK(j.at("segments_evaluated") == 3);
  CHECK(j.at("top_prediction").at("species_name") == "Tone-500");
  CHECK(j.at("per_segment").size() == 3);
  CHECK(j.at("region_applied").is_null());
  CHECK(j.at("unconstrained_top1").is_null());
  const std::vector<std::string> keys = {"segments_evaluated", "top_prediction", "per_segment", "region_applied",
                                         "unconstrained_top1"};
  std::vector<std::string> got;
  for (auto& [k, v] : j.items()) got.push_back(k);
  CHECK(got == keys);

  // Aggregate score: mean score of the winning label over segments.
  double mean = 0.0;
  for (const auto& s : r.segments) mean += s.scores[static_cast<std::size_t>(r.top_label)] / 3.0;
  CHECK(r.aggregate_score == doctest::Approx(mean));
}

TEST_CASE("region masking in classify") {
  Fixture f;
  const Classifier clf = Classifier::from_model(f.trained.model);
  const RegionIndex idx = load_region_index("region,species\nonly-high,Tone-3000\nall,Tone-500\nall,Tone-1500\n",
                                            f.corpus.registry);
  std::mt19937_64 rng(78);
  const auto clip = testing::clip_of(testing::noisy_tone(500.0, 4.0, 16000, 20.0, rng));
  const auto r = clf.classify(clip, std::string("only-high"), &idx);
  CHECK(r.top_label == *f.corpus.registry.find("Tone-3000"));
  REQUIRE(r.unconstrained_top1.has_value());
  CHECK(*r.unconstrained_top1 == *f.corpus.registry.find("Tone-500"));
  for (const auto& s : r.segments) CHECK(idx.contains("only-high", s.label));
  const auto j = classify_response(r, clf.labels());
  CHECK(j.at("region_applied") == "only-high");
  CHECK(j.at("unconstrained_top1") == "Tone-500");

  const auto same = clf.classify(clip, std::string("all"), &idx);
  CHECK_FALSE(same.unconstrained_top1.has_value());

  CHECK_THROWS_AS(clf.classify(clip, std::string("mars"), &idx), UnknownRegionError);
  CHECK_THROWS_AS(clf.classify(clip, std::string("all"), nullptr), UnknownRegionError);
  CHECK_THROWS_AS(clf.classify(testing::clip_of(std::vector<float>(24000, 0.0f)), std::nullopt, nullptr),
                  TooShortError);
  CHECK_THROWS_AS(clf.classify(testing::clip_of(clip.samples, 8000), std::nullopt, nullptr), ArgumentError);
}

TEST_CASE("from_model validates weights and metadata") {
  Fixture f;
  const EncoderConfig enc = small_encoder();
  // Supplied weights must match the recorded hash.
  CHECK_NOTHROW(Classifier::from_model(f.trained.model, std::make_pair(enc, random_weights(enc, 11))));
  CHECK_THROWS_AS(Classifier::from_model(f.trained.model, std::make_pair(enc, random_weights(enc, 12))), WeightError);

  ModelFile no_seed = f.trained.model;
  no_seed.meta.erase(meta::kEncoderSeed);
  CHECK_THROWS_AS(Classifier::from_model(no_seed), WeightError);

  ModelFile wrong_dim = f.trained.model;
  EncoderConfig wide = enc;
  wide.embed_dim = 32;
  wrong_dim.meta[meta::kEncoderConfig] = encoder_config_string(wide);
  wrong_dim.meta.erase(meta::kWeightsHash);
  CHECK_THROWS(Classifier::from_model(wrong_dim));
}

TEST_CASE("gmm head trains through the same pipeline") {
  testing::TempDir dir;
  const auto tones = testing::write_tone_corpus(dir.path(), {700.0, 2500.0}, 2, 4, 20.0, 3);
  const Corpus corpus = load_corpus(load_manifest(tones.manifest), nullptr, 1);
  TrainOptions opt;
  opt.encoder = small_encoder();
  opt.head = HeadKind::kGmm;
  opt.threads = 1;
  const TrainResult r = train_pipeline(corpus, opt);
  CHECK(head_kind(r.model.head) == HeadKind::kGmm);
  CHECK(r.report.accuracy >= 0.5);
  CHECK(r.split.train.size() + r.split.test.size() == 16);
}

TEST_CASE("corpus errors") {
  testing::TempDir dir;
  testing::write_text(dir / "m.csv", "path,label\nmissing.wav,X\n");
  CHECK_THROWS(load_corpus(load_manifest(dir / "m.csv"), nullptr, 1));
  write_wav_file(dir / "short.wav", testing::clip_of(std::vector<float>(1000, 0.0f)));
  testing::write_text(dir / "s.csv", "path,label\nshort.wav,X\n");
  CHECK_THROWS_AS(load_corpus(load_manifest(dir / "s.csv"), nullptr, 1), ArgumentError);
}
