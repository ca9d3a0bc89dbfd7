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

// asgir: train, evaluate and serve the bird-sound classifier.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "asgir/audio.hpp"
#include "asgir/encoder.hpp"
#include "asgir/error.hpp"
#include "asgir/evaluation.hpp"
#include "asgir/geo.hpp"
#include "asgir/heads.hpp"
#include "asgir/pipeline.hpp"
#include "asgir/service.hpp"
#include "asgir/util.hpp"
#include "asgir/wiki.hpp"

// After Eigen: <resolv.h> defines a `_res` macro.
#include <CLI11.hpp>
#include <httplib.h>

namespace {

using asgir::HeadKind;
using Json = nlohmann::ordered_json;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kDecode = 3,
  kRegion = 4,
  kFetch = 5,
};

using Weights = std::optional<std::pair<asgir::EncoderConfig, asgir::EncoderWeights>>;

Weights load_weights_file(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return asgir::load_weights(asgir::read_file_bytes(path));
}

std::vector<HeadKind> parse_heads(const std::string& list) {
  std::vector<HeadKind> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = asgir::trim(item);
    if (!item.empty()) out.push_back(asgir::parse_head_kind(item));
  }
  if (out.empty()) throw asgir::ArgumentError("--heads: no head given");
  return out;
}

struct CommonTrain {
  std::string manifest;
  std::uint64_t seed = 0;
  double ratio = 0.8;
  std::string weights;
  std::string cache_dir;
  unsigned threads = 0;
  double svm_c = 1.0;
  int gmm_k = 1;
};

void add_common(CLI::App* cmd, CommonTrain& c) {
  cmd->add_option("--manifest", c.manifest, "CSV manifest: path,label[,region]")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Seed for split, encoder init and heads");
  cmd->add_option("--ratio", c.ratio, "Train fraction per class")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--weights", c.weights, "ASGW encoder weights (default: seeded random)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--cache-dir", c.cache_dir, "Directory for the embedding cache");
  cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--C", c.svm_c, "SVM regularization")->check(CLI::PositiveNumber);
  cmd->add_option("--gmm-k", c.gmm_k, "GMM components per class")->check(CLI::PositiveNumber);
}

asgir::TrainOptions train_options(const CommonTrain& c) {
  asgir::TrainOptions o;
  o.seed = c.seed;
  o.ratio = c.ratio;
  o.weights = load_weights_file(c.weights);
  o.cache_dir = c.cache_dir;
  o.threads = c.threads;
  o.svm.C = c.svm_c;
  o.svm.seed = c.seed;
  o.gmm.k = c.gmm_k;
  o.gmm.seed = c.seed;
  return o;
}

asgir::Corpus load_corpus_from(const CommonTrain& c) {
  const auto manifest = asgir::load_manifest(c.manifest);
  auto corpus = asgir::load_corpus(manifest, nullptr, c.threads);
  std::cerr << "loaded " << manifest.entries.size() << " recordings, " << corpus.segments.size()
            << " segments, " << corpus.registry.size() << " classes\n";
  return corpus;
}

int run_train(const CommonTrain& c, const std::string& out, const std::string& head) {
  auto opts = train_options(c);
  opts.head = asgir::parse_head_kind(head);
  const auto corpus = load_corpus_from(c);
  const auto result = asgir::train_pipeline(corpus, opts);
  for (const auto& w : result.split.warnings) std::cerr << "warning: " << w << "\n";

  asgir::write_file_bytes(out, asgir::save_model(result.model));

  std::string split_csv = "index,source,offset_s,label,side\n";
  auto add_rows = [&](const std::vector<std::size_t>& idx, const char* side) {
    for (std::size_t i : idx) {
      const auto& s = corpus.segments[i];
      char off[32];
      std::snprintf(off, sizeof off, "%.3f", s.offset_s);
      split_csv += std::to_string(i) + "," + s.parent_id + "," + off + "," +
                   corpus.registry.name(corpus.labels[i]) + "," + side + "\n";
    }
  };
  add_rows(result.split.train, "train");
  add_rows(result.split.test, "test");
  asgir::write_file_text(out + ".split.csv", split_csv);

  Json report = asgir::report_json(result.report);
  report["head"] = head;
  report["seed"] = c.seed;
  report["train_segments"] = result.split.train.size();
  report["test_segments"] = result.split.test.size();
  asgir::write_file_text(out + ".report.json", report.dump(2) + "\n");
  asgir::write_file_text(out + ".report.txt", asgir::report_table(result.report));

  std::cerr << asgir::report_table(result.report);
  Json summary = {{"model", out}, {"accuracy", result.report.accuracy}, {"macro_f1", result.report.macro_f1}};
  std::cout << summary.dump() << "\n";
  return kOk;
}

std::optional<asgir::RegionIndex> load_regions(const std::string& path, const asgir::LabelRegistry& labels) {
  if (path.empty()) return std::nullopt;
  return asgir::load_region_index(asgir::read_file_text(path), labels);
}

asgir::FetchPolicy fetch_policy(const std::string& fixtures, bool live, const std::string& cache_dir) {
  asgir::FetchPolicy p;
  p.mode = live ? asgir::FetchMode::kLive : asgir::FetchMode::kFixture;
  if (!fixtures.empty()) p.fixture_dir = fixtures;
  if (!cache_dir.empty()) p.cache_dir = cache_dir;
  return p;
}

struct PredictArgs {
  std::string model, audio, region, regions, weights, fixtures, cache_dir;
  bool info = false;
  bool live = false;
  unsigned threads = 0;
};

int run_predict(const PredictArgs& a) {
  const auto classifier =
      asgir::Classifier::from_model(asgir::load_model(asgir::read_file_bytes(a.model)), load_weights_file(a.weights));
  const auto index = load_regions(a.regions, classifier.labels());

  asgir::AudioClip clip;
  try {
    clip = asgir::load_canonical(asgir::read_file_bytes(a.audio), a.audio);
  } catch (const asgir::Error& e) {
    std::cerr << "error: cannot decode " << a.audio << ": " << e.what() << "\n";
    return kDecode;
  }

  std::optional<std::string> region;
  if (!a.region.empty()) region = a.region;
  const auto result = classifier.classify(clip, region, index ? &*index : nullptr, a.threads);
  Json body = asgir::classify_response(result, classifier.labels());
  body["species_info"] = nullptr;
  int code = kOk;
  if (a.info) {
    try {
      const int top = result.top_label;
      body["species_info"] = asgir::to_json(asgir::retrieve_species_info(
          top, classifier.labels().name(top), fetch_policy(a.fixtures, a.live, a.cache_dir)));
    } catch (const asgir::Error& e) {
      body["warning"] = std::string("species info unavailable: ") + e.what();
      std::cerr << "error: species info: " << e.what() << "\n";
      code = kFetch;
    }
  }
  std::cout << body.dump(2, ' ', false, Json::error_handler_t::replace) << "\n";
  return code;
}

struct AblateArgs {
  std::string heads = "svm";
  bool with_masking = false;
  std::string regions;
  bool json = false;
};

int run_ablate(const CommonTrain& c, const AblateArgs& a) {
  asgir::AblationOptions opt;
  opt.heads = parse_heads(a.heads);
  opt.with_masking = a.with_masking;
  const auto topt = train_options(c);
  opt.svm = topt.svm;
  opt.gmm = topt.gmm;

  const auto corpus = load_corpus_from(c);
  const auto index = load_regions(a.regions, corpus.registry);
  const auto prepared = asgir::prepare_corpus(corpus, topt);

  asgir::AblationInput in;
  in.embeddings = &prepared.embeddings;
  in.labels = corpus.labels;
  in.regions = corpus.regions;
  in.split = &prepared.split;
  in.registry = &corpus.registry;
  in.region_index = index ? &*index : nullptr;
  const auto rows = asgir::run_ablation(in, opt);

  bool any_ok = false;
  for (const auto& r : rows) {
    if (r.error) std::cerr << "row " << r.model << " failed: " << *r.error << "\n";
    else any_ok = true;
  }
  if (a.json) std::cout << asgir::ablation_json(rows).dump(2) << "\n";
  else std::cout << asgir::ablation_table(rows);
  return any_ok ? kOk : kFailure;
}

struct ServeArgs {
  std::string model, weights, regions, fixtures, cache_dir, ui_dir, host = "127.0.0.1";
  bool live = false;
  int port = 8080;
  double max_upload_mb = 50.0;
  unsigned threads = 1;
};

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const ServeArgs& a) {
  auto classifier = std::make_shared<const asgir::Classifier>(
      asgir::Classifier::from_model(asgir::load_model(asgir::read_file_bytes(a.model)), load_weights_file(a.weights)));
  auto index = std::make_shared<const asgir::RegionIndex>(
      a.regions.empty() ? asgir::RegionIndex() : *load_regions(a.regions, classifier->labels()));

  asgir::ServiceConfig cfg;
  cfg.fetch = fetch_policy(a.fixtures, a.live, a.cache_dir);
  cfg.ui_dir = a.ui_dir;
  cfg.max_upload_bytes = static_cast<std::size_t>(a.max_upload_mb * 1024.0 * 1024.0);
  cfg.pipeline_threads = a.threads;
  asgir::Service service(classifier, index, cfg);

  httplib::Server server;
  service.install(server);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  int port = a.port;
  if (port == 0) {
    port = server.bind_to_any_port(a.host);
  } else if (!server.bind_to_port(a.host, port)) {
    std::cerr << "error: cannot bind " << a.host << ":" << a.port << "\n";
    return kFailure;
  }
  std::cerr << "listening on http://" << a.host << ":" << port << "\n";
  std::cout << Json{{"port", port}}.dump() << std::endl;
  server.listen_after_bind();
  g_server = nullptr;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bird-sound classification with region filtering and species lookup"};
  app.require_subcommand(1);

  CommonTrain train_args;
  std::string out, head = "svm";
  auto* train = app.add_subcommand("train", "Train a classifier head on a manifest");
  add_common(train, train_args);
  train->add_option("--out", out, "Output model path (.asgm)")->required();
  train->add_option("--head", head, "svm | gmm")->check(CLI::IsMember({"svm", "gmm"}));

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Classify one recording");
  predict->add_option("--model", predict_args.model)->required()->check(CLI::ExistingFile);
  predict->add_option("--audio", predict_args.audio)->required()->check(CLI::ExistingFile);
  predict->add_option("--region", predict_args.region, "Region id to restrict predictions to");
  predict->add_option("--regions", predict_args.regions, "Region index (CSV or JSON)")->check(CLI::ExistingFile);
  predict->add_option("--weights", predict_args.weights)->check(CLI::ExistingFile);
  predict->add_flag("--info", predict_args.info, "Attach species information");
  predict->add_option("--fixtures", predict_args.fixtures, "Fixture directory for species pages");
  predict->add_flag("--live-wiki", predict_args.live, "Fetch species pages over HTTP");
  predict->add_option("--cache-dir", predict_args.cache_dir, "Page cache for live fetches");
  predict->add_option("--threads", predict_args.threads);

  CommonTrain ablate_common;
  AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "Compare heads with and without region masking");
  add_common(ablate, ablate_common);
  ablate->add_option("--heads", ablate_args.heads, "Comma-separated heads, e.g. svm,gmm");
  ablate->add_flag("--with-masking", ablate_args.with_masking, "Add region-masked rows");
  ablate->add_option("--regions", ablate_args.regions, "Region index (CSV or JSON)")->check(CLI::ExistingFile);
  ablate->add_flag("--json", ablate_args.json, "Print JSON instead of a table");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--model", serve_args.model)->required()->check(CLI::ExistingFile);
  serve->add_option("--weights", serve_args.weights)->check(CLI::ExistingFile);
  serve->add_option("--regions", serve_args.regions)->check(CLI::ExistingFile);
  serve->add_option("--fixtures", serve_args.fixtures);
  serve->add_flag("--live-wiki", serve_args.live);
  serve->add_option("--cache-dir", serve_args.cache_dir);
  serve->add_option("--ui-dir", serve_args.ui_dir, "Static files served under /");
  serve->add_option("--host", serve_args.host);
  serve->add_option("--port", serve_args.port, "0 picks a free port");
  serve->add_option("--max-upload-mb", serve_args.max_upload_mb)->check(CLI::PositiveNumber);
  serve->add_option("--threads", serve_args.threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return run_train(train_args, out, head);
    if (*predict) return run_predict(predict_args);
    if (*ablate) {
      if (ablate_args.with_masking && ablate_args.regions.empty())
        throw asgir::ArgumentError("--with-masking requires --regions");
      return run_ablate(ablate_common, ablate_args);
    }
    if (*serve) return run_serve(serve_args);
  } catch (const asgir::UnknownRegionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRegion;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
