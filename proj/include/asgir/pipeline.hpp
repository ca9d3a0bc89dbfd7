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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asgir/audio.hpp"
#include "asgir/encoder.hpp"
#include "asgir/evaluation.hpp"
#include "asgir/geo.hpp"
#include "asgir/heads.hpp"
#include "asgir/spectrogram.hpp"
#include "asgir/wiki.hpp"

namespace asgir {

// Front-end plus upstream encoder: segment -> log-mel -> embedding.
class FeatureExtractor {
 public:
  FeatureExtractor(SpectrogramConfig spec_cfg, EncoderConfig enc_cfg, const EncoderWeights& weights);

  const SpectrogramConfig& spectrogram_config() const { return spec_cfg_; }
  const EncoderConfig& encoder_config() const { return encoder_.config(); }
  std::uint64_t weights_hash() const { return weights_hash_; }

  MelSpectrogram spectrogram(const Segment& s) const;
  Embedding embed(const Segment& s) const;
  // Parallel over segments; output order follows input order.
  std::vector<std::vector<double>> embed_all(std::span<const Segment> segments, unsigned threads = 0) const;

 private:
  SpectrogramConfig spec_cfg_;
  Matrix filterbank_;
  Encoder encoder_;
  std::uint64_t weights_hash_;
};

// Labeled segments gathered from a manifest.
struct Corpus {
  LabelRegistry registry;
  std::vector<Segment> segments;
  std::vector<int> labels;
  std::vector<std::optional<std::string>> regions;
};

// Decodes every manifest entry (in parallel), resamples to 16 kHz and cuts
// 2-second segments. Registry = sorted distinct manifest labels unless given.
Corpus load_corpus(const DatasetManifest& manifest, const LabelRegistry* registry = nullptr,
                   unsigned threads = 0);

// Mean/std of raw log-mel entries over the chosen segments.
std::pair<double, double> normalization_stats(std::span<const Segment> segments,
                                              std::span<const std::size_t> which,
                                              SpectrogramConfig cfg, unsigned threads = 0);

// Content-addressed store of corpus embeddings keyed by (weights hash,
// spectrogram config, segment contents).
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::string key(const FeatureExtractor& fx, std::span<const Segment> segments) const;
  std::optional<std::vector<std::vector<double>>> load(const std::string& key) const;
  void store(const std::string& key, const std::vector<std::vector<double>>& rows) const;

 private:
  std::filesystem::path dir_;
};

std::vector<std::vector<double>> embed_corpus(const FeatureExtractor& fx, std::span<const Segment> segments,
                                              const std::filesystem::path& cache_dir = {},
                                              unsigned threads = 0);

struct TrainOptions {
  HeadKind head = HeadKind::kSvm;
  std::uint64_t seed = 0;
  double ratio = 0.8;
  SpectrogramConfig spectrogram;  // norm stats are recomputed from the train split
  EncoderConfig encoder;
  std::optional<std::pair<EncoderConfig, EncoderWeights>> weights;  // else random(seed)
  SvmOptions svm;
  GmmOptions gmm;
  std::filesystem::path cache_dir;
  unsigned threads = 0;
};

// Split, normalization stats from the train side, and embeddings of every
// segment. Shared by training and the ablation runner.
struct PreparedCorpus {
  Split split;
  SpectrogramConfig spectrogram;  // with the fitted norm stats
  EncoderConfig encoder;
  std::uint64_t weights_hash = 0;
  std::vector<std::vector<double>> embeddings;
};

PreparedCorpus prepare_corpus(const Corpus& corpus, const TrainOptions& options);

struct TrainResult {
  ModelFile model;
  Split split;
  ClassReport report;
  std::vector<std::vector<double>> embeddings;
};

// Split -> normalization stats -> embeddings -> head -> test report.
TrainResult train_pipeline(const Corpus& corpus, const TrainOptions& options);

// Metadata keys written into the model file so inference can rebuild the
// exact front-end and encoder.
namespace meta {
inline constexpr const char* kNormMean = "spectrogram.norm_mean";
inline constexpr const char* kNormStd = "spectrogram.norm_std";
inline constexpr const char* kEncoderConfig = "encoder.config";
inline constexpr const char* kEncoderSeed = "encoder.seed";
inline constexpr const char* kWeightsHash = "encoder.weights_hash";
}  // namespace meta

std::string encoder_config_string(const EncoderConfig& cfg);
EncoderConfig parse_encoder_config(const std::string& s);

// A loaded model ready for inference.
class Classifier {
 public:
  // `weights` overrides the seeded encoder recorded in the model; its hash
  // must match the one stored at training time.
  static Classifier from_model(ModelFile model,
                               std::optional<std::pair<EncoderConfig, EncoderWeights>> weights = std::nullopt);

  const LabelRegistry& labels() const { return labels_of(model_.head); }
  const FeatureExtractor& features() const { return *features_; }
  const HeadModel& head() const { return model_.head; }

  struct SegmentResult {
    double offset_s = 0.0;
    int label = 0;
    double score = 0.0;
    ScoreVector scores;  // after masking
    ScoreVector raw_scores;
  };

  struct Result {
    std::vector<SegmentResult> segments;
    int top_label = 0;
    double aggregate_score = 0.0;
    std::optional<std::string> region;
    std::optional<int> unconstrained_top1;  // set when masking changed the answer
  };

  // Throws ArgumentError when the clip holds less than one segment and
  // UnknownRegionError for unknown regions.
  Result classify(const AudioClip& canonical_clip, const std::optional<std::string>& region,
                  const RegionIndex* index, unsigned threads = 1) const;

 private:
  Classifier(ModelFile model, std::shared_ptr<const FeatureExtractor> fx)
      : model_(std::move(model)), features_(std::move(fx)) {}
  ModelFile model_;
  std::shared_ptr<const FeatureExtractor> features_;
};

// Majority vote over per-segment predictions; ties go to the larger summed
// score of the tied classes, then to the lower class id.
int majority_vote(std::span<const int> predictions, std::span<const ScoreVector> scores);

// JSON body shared by the CLI `predict` command and POST /api/classify.
nlohmann::ordered_json classify_response(const Classifier::Result& result, const LabelRegistry& labels);

}  // namespace asgir
