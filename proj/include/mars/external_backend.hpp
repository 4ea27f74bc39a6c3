// Copyright 2026 The mars-context Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>

#include "httplib.h"
#include "json.hpp"
#include "mars/core.hpp"
#include "mars/decoding.hpp"

namespace mars {

// Backend wire schema, one JSON object per exchange:
//   request  {request_id, language_prompt, context_hypothesis|null,
//             current_hypothesis, embedding_path}
//   response {request_id, transcription, error|null}
inline nlohmann::ordered_json backend_request(const PromptBundle& b, const std::string& embedding_path) {
  nlohmann::ordered_json j;
  j["request_id"] = b.utterance_ref.str();
  j["language_prompt"] = b.language_prompt;
  j["context_hypothesis"] = b.context_hypothesis ? nlohmann::json(*b.context_hypothesis) : nlohmann::json(nullptr);
  j["current_hypothesis"] = b.current_hypothesis;
  j["embedding_path"] = embedding_path;
  return j;
}

// Throws BackendError on a malformed, mismatched or error-carrying response.
inline std::string parse_backend_response(const std::string& body, const std::string& request_id) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError("unparseable response for " + request_id + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("request_id") || j["request_id"] != request_id) {
    throw BackendError("response does not answer request " + request_id);
  }
  if (auto it = j.find("error"); it != j.end() && !it->is_null()) {
    throw BackendError("backend reported for " + request_id + ": " + it->dump());
  }
  auto t = j.find("transcription");
  if (t == j.end() || !t->is_string()) throw BackendError("response for " + request_id + " lacks a transcription");
  return t->get<std::string>();
}

// POSTs each bundle to an HTTP endpoint such as http://127.0.0.1:8080/transcribe.
class HttpBackend final : public AsrBackend {
 public:
  HttpBackend(const ContextDatabase& db, std::string endpoint) : db_(db), endpoint_(std::move(endpoint)) {
    const auto scheme = endpoint_.find("://");
    if (scheme == std::string::npos) throw ConfigError("backend endpoint must look like http://host:port/path");
    const auto slash = endpoint_.find('/', scheme + 3);
    base_ = endpoint_.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : endpoint_.substr(slash);
  }

  std::string id() const override { return "external:" + endpoint_; }

  std::string transcribe(const PromptBundle& bundle) const override {
    const auto& rec = db_.at(bundle.utterance_ref);
    const std::string request_id = bundle.utterance_ref.str();
    httplib::Client client(base_);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    auto res = client.Post(path_, backend_request(bundle, rec.embedding_path.string()).dump(), "application/json");
    if (!res) throw BackendError("request " + request_id + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      throw BackendError("request " + request_id + " returned HTTP " + std::to_string(res->status));
    }
    return parse_backend_response(res->body, request_id);
  }

 private:
  const ContextDatabase& db_;
  std::string endpoint_;
  std::string base_;
  std::string path_;
};

}  // namespace mars
