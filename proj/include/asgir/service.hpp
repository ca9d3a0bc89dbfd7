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

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "asgir/geo.hpp"
#include "asgir/pipeline.hpp"
#include "asgir/wiki.hpp"

namespace httplib {
class Server;
}

namespace asgir {

struct ServiceConfig {
  std::size_t max_upload_bytes = 50u * 1024u * 1024u;
  FetchPolicy fetch;
  std::filesystem::path ui_dir;  // served under "/" when set
  unsigned pipeline_threads = 1;
};

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Request handlers over a model and region index loaded once at startup.
// Handlers are callable directly (tests) or through an httplib server.
class Service {
 public:
  Service(std::shared_ptr<const Classifier> classifier, std::shared_ptr<const RegionIndex> regions,
          ServiceConfig config);

  HttpReply classify(const std::string& audio, const std::optional<std::string>& region,
                     bool include_info) const;
  HttpReply regions() const;
  HttpReply species_info(const std::string& name) const;

  // Registers the /api routes and the static mount on `server`.
  void install(httplib::Server& server) const;

  const ServiceConfig& config() const { return config_; }

 private:
  struct InfoSlot {
    std::mutex mu;
    std::optional<std::string> body;  // cached 200 response
  };

  // Cached retrieval; throws the retrieval errors on failure.
  std::string info_json(int species_id) const;

  std::shared_ptr<const Classifier> classifier_;
  std::shared_ptr<const RegionIndex> regions_;
  ServiceConfig config_;
  mutable std::mutex slots_mu_;
  mutable std::map<int, std::shared_ptr<InfoSlot>> slots_;
};

}  // namespace asgir
