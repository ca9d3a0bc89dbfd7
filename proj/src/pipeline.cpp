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

#include "asgir/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>

#include "asgir/error.hpp"
#include "asgir/util.hpp"

namespace asgir {
namespace {

constexpr char kCacheMagic[4] = {'A', 'S', 'G', 'E'};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(std::string("model metadata: bad value for ") + what + ": '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& s, const char* what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw FormatError(std::string("model metadata: bad value for ") + what + ": '" + s + "'");
  return v;
}

const std::string* meta_get(const ModelFile& m, const char* key) {
  auto it = m.meta.find(key);
  return it == m.meta.end() ? nullptr : &it->second;
}

std::vector<std::vector<double>> rows_of(const std::vector<std::vector<double>>& x,
                                         std::span<const std::size_t> which) {
  std::vector<std::vector<double>> out;
  out.reserve(which.size());
  for (std::size_t i : which) out.push_back(x[i]);
  return out;
}

}  // namespace

FeatureExtractor::FeatureExtractor(SpectrogramConfig spec_cfg, EncoderConfig enc_cfg,
                                   const EncoderWeights& weights)
    : spec_cfg_(std::move(spec_cfg)),
      filterbank_((spec_cfg_.validate(), mel_filterbank(spec_cfg_))),
      encoder_(enc_cfg, weights),
      weights_hash_(asgir::weights_hash(enc_cfg, weights)) {
  if (enc_cfg.input_bins != spec_cfg_.n_mels)
    throw ConfigError("encoder input_bins (" + std::to_string(enc_cfg.input_bins) +
                      ") differs from n_mels (" + std::to_string(spec_cfg_.n_mels) + ")");
}

MelSpectrogram FeatureExtractor::spectrogram(const Segment& s) const {
  return log_mel(s, spec_cfg_, filterbank_);
}

Embedding FeatureExtractor::embed(const Segment& s) const {
  Embedding e = encoder_.encode(spectrogram(s));
  e.segment_ref = s.parent_id + "@" + format_double(s.offset_s);
  return e;
}

std::vector<std::vector<double>> FeatureExtractor::embed_all(std::span<const Segment> segments,
                                                             unsigned threads) const {
  std::vector<std::vector<double>> out(segments.size());
  parallel_for(segments.size(), [&](std::size_t i) { out[i] = embed(segments[i]).vector; }, threads);
  return out;
}

Corpus load_corpus(const DatasetManifest& manifest, const LabelRegistry* registry, unsigned threads) {
  if (manifest.entries.empty()) throw ArgumentError("manifest has no entries");
  Corpus corpus;
  corpus.registry = registry ? *registry : LabelRegistry(manifest.labels());
  std::vector<int> entry_labels;
  for (const auto& e : manifest.entries) entry_labels.push_back(corpus.registry.id(e.label));

  std::vector<std::vector<Segment>> per_entry(manifest.entries.size());
  parallel_for(
      manifest.entries.size(),
      [&](std::size_t i) {
        const auto& e = manifest.entries[i];
        const auto bytes = read_file_bytes(e.path);
        per_entry[i] = segment(load_canonical(bytes, e.path.string()));
      },
      threads);

  for (std::size_t i = 0; i < per_entry.size(); ++i) {
    for (auto& s : per_entry[i]) {
      s.label = entry_labels[i];
      corpus.labels.push_back(entry_labels[i]);
      corpus.regions.push_back(manifest.entries[i].region);
      corpus.segments.push_back(std::move(s));
    }
  }
  if (corpus.segments.empty()) throw ArgumentError("manifest yields no segments of 2 s or longer");
  return corpus;
}

std::pair<double, double> normalization_stats(std::span<const Segment> segments,
                                              std::span<const std::size_t> which,
                                              SpectrogramConfig cfg, unsigned threads) {
  cfg.validate();
  const Matrix fb = mel_filterbank(cfg);
  std::vector<NormAccumulator> acc(which.size());
  parallel_for(
      which.size(),
      [&](std::size_t i) { acc[i].add(log_mel_energies(segments[which[i]].clip.samples, cfg, fb)); },
      threads);
  NormAccumulator total;
  for (const auto& a : acc) total.merge(a);
  return {total.mean(), total.stddev()};
}

std::string EmbeddingCache::key(const FeatureExtractor& fx, std::span<const Segment> segments) const {
  std::uint64_t h = fnv1a64(hex64(fx.weights_hash()));
  h = fnv1a64(fx.spectrogram_config().fingerprint(), h);
  h = fnv1a64(encoder_config_string(fx.encoder_config()), h);
  for (const auto& s : segments) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(s.clip.samples.data());
    h = fnv1a64(std::span<const std::uint8_t>(p, s.clip.samples.size() * sizeof(float)), h);
    h = fnv1a64(std::to_string(s.clip.sample_rate_hz), h);
  }
  return hex64(h);
}

std::optional<std::vector<std::vector<double>>> EmbeddingCache::load(const std::string& key) const {
  const auto path = dir_ / (key + ".emb");
  std::error_code ec;
  if (dir_.empty() || !std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const auto bytes = read_file_bytes(path);
    ByteReader r(bytes);
    r.set_context("embedding cache");
    const auto magic = r.take(4);
    if (std::memcmp(magic.data(), kCacheMagic, 4) != 0) return std::nullopt;
    const std::uint64_t n = r.u64();
    const std::uint64_t dim = r.u64();
    if (r.remaining() != n * dim * sizeof(double)) return std::nullopt;
    std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
    for (auto& row : rows) {
      const auto raw = r.take(dim * sizeof(double));
      std::memcpy(row.data(), raw.data(), raw.size());
    }
    return rows;
  } catch (const Error&) {
    return std::nullopt;
  }
}

void EmbeddingCache::store(const std::string& key, const std::vector<std::vector<double>>& rows) const {
  if (dir_.empty()) return;
  ByteWriter w;
  w.raw(std::string_view(kCacheMagic, 4));
  const std::uint64_t dim = rows.empty() ? 0 : rows.front().size();
  w.u64(rows.size());
  w.u64(dim);
  for (const auto& row : rows) {
    if (row.size() != dim) throw ShapeError("embedding cache: ragged rows");
    w.raw(std::string_view(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(double)));
  }
  const auto path = dir_ / (key + ".emb");
  const auto tmp = dir_ / (key + ".emb.tmp");
  write_file_bytes(tmp, w.bytes());
  std::filesystem::rename(tmp, path);
}

std::vector<std::vector<double>> embed_corpus(const FeatureExtractor& fx, std::span<const Segment> segments,
                                              const std::filesystem::path& cache_dir, unsigned threads) {
  EmbeddingCache cache(cache_dir);
  std::string key;
  if (!cache_dir.empty()) {
    key = cache.key(fx, segments);
    if (auto hit = cache.load(key); hit && hit->size() == segments.size()) return std::move(*hit);
  }
  auto rows = fx.embed_all(segments, threads);
  if (!cache_dir.empty()) cache.store(key, rows);
  return rows;
}

std::string encoder_config_string(const EncoderConfig& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "patch_h=%d,patch_w=%d,stride_h=%d,stride_w=%d,embed_dim=%d,n_layers=%d,n_heads=%d,"
                "mlp_ratio=%d,pooling=%s,input_frames=%d,input_bins=%d",
                c.patch_h, c.patch_w, c.stride_h, c.stride_w, c.embed_dim, c.n_layers, c.n_heads,
                c.mlp_ratio, c.pooling == Pooling::kMean ? "mean" : "cls", c.input_frames, c.input_bins);
  return buf;
}

EncoderConfig parse_encoder_config(const std::string& s) {
  EncoderConfig c;
  std::map<std::string, int*> ints = {
      {"patch_h", &c.patch_h},     {"patch_w", &c.patch_w},       {"stride_h", &c.stride_h},
      {"stride_w", &c.stride_w},   {"embed_dim", &c.embed_dim},   {"n_layers", &c.n_layers},
      {"n_heads", &c.n_heads},     {"mlp_ratio", &c.mlp_ratio},   {"input_frames", &c.input_frames},
      {"input_bins", &c.input_bins}};
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = std::min(s.find(',', start), s.size());
    const std::string item = s.substr(start, end - start);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) throw FormatError("encoder config: malformed item '" + item + "'");
    const std::string k = item.substr(0, eq), v = item.substr(eq + 1);
    if (k == "pooling") {
      if (v == "mean") c.pooling = Pooling::kMean;
      else if (v == "cls") c.pooling = Pooling::kClsToken;
      else throw FormatError("encoder config: unknown pooling '" + v + "'");
    } else if (auto it = ints.find(k); it != ints.end()) {
      *it->second = static_cast<int>(parse_u64(v, k.c_str()));
    } else {
      throw FormatError("encoder config: unknown key '" + k + "'");
    }
    start = end + 1;
  }
  c.validate();
  return c;
}

PreparedCorpus prepare_corpus(const Corpus& corpus, const TrainOptions& opt) {
  if (corpus.segments.size() != corpus.labels.size())
    throw ArgumentError("corpus: segments/labels length mismatch");
  PreparedCorpus p;
  p.split = split(corpus.labels, corpus.registry.size(), opt.ratio, opt.seed);

  p.encoder = opt.weights ? opt.weights->first : opt.encoder;
  const EncoderWeights weights = opt.weights ? opt.weights->second : random_weights(p.encoder, opt.seed);

  p.spectrogram = opt.spectrogram;
  p.spectrogram.norm_mean = 0.0;
  p.spectrogram.norm_std = 1.0;
  const auto [mu, sigma] = normalization_stats(corpus.segments, p.split.train, p.spectrogram, opt.threads);
  p.spectrogram.norm_mean = mu;
  p.spectrogram.norm_std = sigma;

  const FeatureExtractor fx(p.spectrogram, p.encoder, weights);
  p.weights_hash = fx.weights_hash();
  p.embeddings = embed_corpus(fx, corpus.segments, opt.cache_dir, opt.threads);
  return p;
}

TrainResult train_pipeline(const Corpus& corpus, const TrainOptions& opt) {
  PreparedCorpus p = prepare_corpus(corpus, opt);
  TrainResult result;
  result.split = std::move(p.split);
  result.embeddings = std::move(p.embeddings);

  const auto train_x = rows_of(result.embeddings, result.split.train);
  std::vector<int> train_y, truth, pred;
  for (std::size_t i : result.split.train) train_y.push_back(corpus.labels[i]);

  HeadModel head = opt.head == HeadKind::kSvm
                       ? HeadModel(svm_train(train_x, train_y, corpus.registry, opt.svm))
                       : HeadModel(gmm_train(train_x, train_y, corpus.registry, opt.gmm));

  for (std::size_t i : result.split.test) {
    truth.push_back(corpus.labels[i]);
    pred.push_back(argmax(score(head, result.embeddings[i])));
  }
  result.report = class_report(confusion(truth, pred, corpus.registry.size()), corpus.registry);

  result.model.head = std::move(head);
  auto& m = result.model.meta;
  m[meta::kNormMean] = format_double(p.spectrogram.norm_mean);
  m[meta::kNormStd] = format_double(p.spectrogram.norm_std);
  m[meta::kEncoderConfig] = encoder_config_string(p.encoder);
  if (!opt.weights) m[meta::kEncoderSeed] = std::to_string(opt.seed);
  m[meta::kWeightsHash] = hex64(p.weights_hash);
  return result;
}

Classifier Classifier::from_model(ModelFile model,
                                  std::optional<std::pair<EncoderConfig, EncoderWeights>> weights) {
  SpectrogramConfig spec_cfg;
  if (const auto* v = meta_get(model, meta::kNormMean)) spec_cfg.norm_mean = parse_double(*v, meta::kNormMean);
  if (const auto* v = meta_get(model, meta::kNormStd)) spec_cfg.norm_std = parse_double(*v, meta::kNormStd);

  EncoderConfig enc_cfg;
  if (const auto* v = meta_get(model, meta::kEncoderConfig)) enc_cfg = parse_encoder_config(*v);
  const std::string* stored_hash = meta_get(model, meta::kWeightsHash);

  EncoderWeights w;
  if (weights) {
    if (weights->first != enc_cfg && meta_get(model, meta::kEncoderConfig))
      throw WeightError("encoder weights: config differs from the one the model was trained with");
    enc_cfg = weights->first;
    w = std::move(weights->second);
  } else {
    const std::string* seed = meta_get(model, meta::kEncoderSeed);
    if (!seed) throw WeightError("model was trained with external encoder weights; pass them explicitly");
    w = random_weights(enc_cfg, parse_u64(*seed, meta::kEncoderSeed));
  }
  auto fx = std::make_shared<const FeatureExtractor>(spec_cfg, enc_cfg, w);
  if (stored_hash && *stored_hash != hex64(fx->weights_hash()))
    throw WeightError("encoder weights hash " + hex64(fx->weights_hash()) +
                      " does not match the model's " + *stored_hash);
  const auto& head = model.head;
  const std::size_t dim = std::holds_alternative<SvmModel>(head) ? std::get<SvmModel>(head).dim
                                                                  : std::get<GmmModel>(head).dim;
  if (dim != static_cast<std::size_t>(enc_cfg.embed_dim))
    throw ShapeError("head dimension " + std::to_string(dim) + " differs from encoder embed_dim " +
                     std::to_string(enc_cfg.embed_dim));
  return Classifier(std::move(model), std::move(fx));
}

Classifier::Result Classifier::classify(const AudioClip& clip, const std::optional<std::string>& region,
                                        const RegionIndex* index, unsigned threads) const {
  if (region) {
    if (!index) throw UnknownRegionError("unknown region '" + *region + "' (no region index loaded)");
    index->at(*region);
  }
  if (clip.sample_rate_hz != features_->spectrogram_config().sample_rate_hz)
    throw ArgumentError("classify: clip is not at the canonical sample rate");
  const auto segs = segment(clip);
  if (segs.empty())
    throw TooShortError("audio is " + format_double(clip.duration_s()) +
                        " s long; at least one 2 s segment is required");

  Result r;
  r.region = region;
  r.segments.resize(segs.size());
  parallel_for(
      segs.size(),
      [&](std::size_t i) {
        auto& out = r.segments[i];
        out.offset_s = segs[i].offset_s;
        out.raw_scores = score(model_.head, features_->embed(segs[i]).vector);
        out.scores = region ? mask_scores(out.raw_scores, region, *index) : out.raw_scores;
        out.label = argmax(out.scores);
        out.score = out.scores[static_cast<std::size_t>(out.label)];
      },
      threads);

  std::vector<int> masked, raw;
  std::vector<ScoreVector> masked_scores, raw_scores;
  for (const auto& s : r.segments) {
    masked.push_back(s.label);
    masked_scores.push_back(s.scores);
    raw.push_back(argmax(s.raw_scores));
    raw_scores.push_back(s.raw_scores);
  }
  r.top_label = majority_vote(masked, masked_scores);
  double sum = 0.0;
  for (const auto& s : r.segments) sum += s.scores[static_cast<std::size_t>(r.top_label)];
  r.aggregate_score = sum / static_cast<double>(r.segments.size());
  if (region) {
    const int unconstrained = majority_vote(raw, raw_scores);
    if (unconstrained != r.top_label) r.unconstrained_top1 = unconstrained;
  }
  return r;
}

int majority_vote(std::span<const int> predictions, std::span<const ScoreVector> scores) {
  if (predictions.empty()) throw ArgumentError("majority_vote: no predictions");
  if (scores.size() != predictions.size()) throw ArgumentError("majority_vote: scores/predictions mismatch");
  std::map<int, int> counts;
  for (int p : predictions) ++counts[p];
  int best_count = 0;
  for (const auto& [label, n] : counts) best_count = std::max(best_count, n);
  int best = -1;
  double best_sum = 0.0;
  for (const auto& [label, n] : counts) {
    if (n != best_count) continue;
    double sum = 0.0;
    for (const auto& s : scores) sum += s.at(static_cast<std::size_t>(label));
    if (best < 0 || sum > best_sum) {
      best = label;
      best_sum = sum;
    }
  }
  return best;
}

nlohmann::ordered_json classify_response(const Classifier::Result& r, const LabelRegistry& labels) {
  nlohmann::ordered_json j;
  j["segments_evaluated"] = r.segments.size();
  j["top_prediction"] = {{"species_name", labels.name(r.top_label)}, {"aggregate_score", r.aggregate_score}};
  auto per = nlohmann::ordered_json::array();
  for (const auto& s : r.segments)
    per.push_back({{"offset_s", s.offset_s}, {"species_name", labels.name(s.label)}, {"score", s.score}});
  j["per_segment"] = std::move(per);
  j["region_applied"] = r.region ? nlohmann::ordered_json(*r.region) : nlohmann::ordered_json(nullptr);
  j["unconstrained_top1"] =
      r.unconstrained_top1 ? nlohmann::ordered_json(labels.name(*r.unconstrained_top1)) : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace asgir
