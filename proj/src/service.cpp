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

#include "asgir/service.hpp"

#include <httplib.h>

#include <span>

#include "asgir/audio.hpp"
#include "asgir/error.hpp"
#include "asgir/util.hpp"

namespace asgir {
namespace {

using Json = nlohmann::ordered_json;

HttpReply error_reply(int status, const std::string& message) {
  return {status, Json{{"error", message}}.dump()};
}

std::string dump(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace); }

bool parse_flag(const std::string& v, bool fallback) {
  const std::string s = to_lower(trim(v));
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  return fallback;
}

void send(httplib::Response& res, const HttpReply& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

}  // namespace

Service::Service(std::shared_ptr<const Classifier> classifier, std::shared_ptr<const RegionIndex> regions,
                 ServiceConfig config)
    : classifier_(std::move(classifier)), regions_(std::move(regions)), config_(std::move(config)) {
  if (!classifier_) throw ArgumentError("service: no classifier");
  if (!regions_) regions_ = std::make_shared<const RegionIndex>();
  config_.fetch.validate();
}

std::string Service::info_json(int species_id) const {
  std::shared_ptr<InfoSlot> slot;
  {
    std::lock_guard lock(slots_mu_);
    auto& s = slots_[species_id];
    if (!s) s = std::make_shared<InfoSlot>();
    slot = s;
  }
  std::lock_guard lock(slot->mu);
  if (!slot->body) {
    const auto& name = classifier_->labels().name(species_id);
    slot->body = dump(to_json(retrieve_species_info(species_id, name, config_.fetch)));
  }
  return *slot->body;
}

HttpReply Service::classify(const std::string& audio, const std::optional<std::string>& region,
                            bool include_info) const {
  if (audio.size() > config_.max_upload_bytes) return error_reply(413, "upload exceeds the size limit");
  if (region && !regions_->find(*region)) return error_reply(400, "unknown region '" + *region + "'");
  Classifier::Result result;
  try {
    const auto* p = reinterpret_cast<const std::uint8_t*>(audio.data());
    const AudioClip clip = load_canonical(std::span<const std::uint8_t>(p, audio.size()), "upload");
    result = classifier_->classify(clip, region, regions_.get(), config_.pipeline_threads);
  } catch (const TooShortError& e) {
    return error_reply(422, e.what());
  } catch (const UnknownRegionError& e) {
    return error_reply(400, e.what());
  } catch (const FormatError& e) {
    return error_reply(400, std::string("undecodable audio: ") + e.what());
  } catch (const UnsupportedCodecError& e) {
    return error_reply(400, std::string("undecodable audio: ") + e.what());
  } catch (const ArgumentError& e) {
    return error_reply(400, e.what());
  }

  Json body = classify_response(result, classifier_->labels());
  body["species_info"] = nullptr;
  int status = 200;
  if (include_info) {
    try {
      body["species_info"] = Json::parse(info_json(result.top_label));
    } catch (const Error& e) {
      status = 502;
      body["warning"] = std::string("species info unavailable: ") + e.what();
    }
  }
  return {status, dump(body)};
}

HttpReply Service::regions() const {
  Json arr = Json::array();
  for (const Region* r : regions_->sorted())
    arr.push_back({{"region_id", r->id}, {"display_name", r->display_name}, {"species_count", r->species.size()}});
  return {200, dump(arr)};
}

HttpReply Service::species_info(const std::string& name) const {
  const auto id = classifier_->labels().find(name);
  if (!id) return error_reply(404, "unknown species '" + name + "'");
  try {
    return {200, info_json(*id)};
  } catch (const Error& e) {
    return error_reply(502, std::string("upstream failure: ") + e.what());
  }
}

void Service::install(httplib::Server& server) const {
  server.set_payload_max_length(config_.max_upload_bytes);

  server.Post("/api/classify", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_file("audio")) return send(res, error_reply(400, "multipart field 'audio' is required"));
    std::optional<std::string> region;
    if (req.has_file("region")) {
      const std::string v = trim(req.get_file_value("region").content);
      if (!v.empty()) region = v;
    }
    const bool include_info =
        req.has_param("include_info") ? parse_flag(req.get_param_value("include_info"), true) : true;
    send(res, classify(req.get_file_value("audio").content, region, include_info));
  });

  server.Get("/api/regions", [this](const httplib::Request&, httplib::Response& res) { send(res, regions()); });

  server.Get(R"(/api/species/([^/]+)/info)", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, species_info(httplib::detail::decode_url(req.matches[1].str(), false)));
  });

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, error_reply(500, what));
  });

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const std::string msg = res.status == 413 ? "upload exceeds the size limit" : httplib::status_message(res.status);
      res.set_content(Json{{"error", msg}}.dump(), "application/json");
    }
  });

  if (!config_.ui_dir.empty()) server.set_mount_point("/", config_.ui_dir.string());
}

}  // namespace asgir
