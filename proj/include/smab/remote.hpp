// Copyright 2026 The smab Authors
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

// HTTP client for the oracle wire protocol:
//
//   POST /v1/classify    {"texts":[s...]}                          -> {"labels":[s...]}
//   POST /v1/fill_mask   {"text":s,"mask_token":"[MASK]","top_k":n} -> {"candidates":[{"token":s,"score":f}...]}
//   GET  /v1/info                                                   -> {"name":s,"labels":[s...],"fingerprint":s}
//   POST /v1/keyphrases  {"text":s}                                 -> {"keyphrases":[[w...]...]}
//
// fill_mask requests also carry an optional "original" field with the masked
// word; servers backed by a real masked LM ignore it.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "smab/errors.hpp"
#include "smab/oracle.hpp"

namespace smab {

struct RemoteOptions {
  std::size_t batch_size = 32;
  int retries = 3;
  std::chrono::milliseconds backoff{250};
  std::chrono::seconds timeout{30};
};

class RemoteOracle final : public Classifier, public Perturber {
 public:
  explicit RemoteOracle(const std::string& url, RemoteOptions options = {})
      : url_(url), options_(options) {
    // split "scheme://host[:port][/prefix]"
    const auto scheme_end = url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    const std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    client_ = std::make_unique<httplib::Client>(base);
    if (!client_->is_valid()) raise(ErrorKind::kConfig, "invalid oracle url '" + url + "'");
    client_->set_connection_timeout(options_.timeout);
    client_->set_read_timeout(options_.timeout);
    client_->set_write_timeout(options_.timeout);
  }

  std::vector<std::string> classify(std::span<const std::string> texts) override {
    const OracleInfo& meta = cached_info();
    std::vector<std::string> out;
    out.reserve(texts.size());
    const std::size_t batch = std::max<std::size_t>(options_.batch_size, 1);
    for (std::size_t start = 0; start < texts.size(); start += batch) {
      const std::size_t n = std::min(batch, texts.size() - start);
      nlohmann::json req{{"texts", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                                            texts.begin() + static_cast<std::ptrdiff_t>(start + n))}};
      const nlohmann::json resp = post("/v1/classify", req);
      auto labels = parse_classify_response(resp, n);
      for (auto& l : labels) {
        if (!meta.labels.empty() && std::find(meta.labels.begin(), meta.labels.end(), l) == meta.labels.end()) {
          raise(ErrorKind::kProtocolViolation, "label '" + l + "' is not in the declared label set");
        }
        out.push_back(std::move(l));
      }
    }
    return out;
  }

  std::vector<Candidate> fill_mask(const MaskQuery& query) override {
    nlohmann::json req{{"text", query.text}, {"mask_token", kMaskToken}, {"top_k", query.top_k}};
    if (query.original) req["original"] = *query.original;
    return parse_fill_mask_response(post("/v1/fill_mask", req), query.top_k);
  }

  OracleInfo info() override { return cached_info(); }

  std::vector<std::vector<std::string>> keyphrases(const std::string& input) {
    const nlohmann::json resp = post("/v1/keyphrases", {{"text", input}});
    try {
      return resp.at("keyphrases").get<std::vector<std::vector<std::string>>>();
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorKind::kProtocolViolation, std::string("bad keyphrases response: ") + e.what());
    }
  }

  static std::vector<std::string> parse_classify_response(const nlohmann::json& resp, std::size_t expected) {
    if (!resp.is_object() || !resp.contains("labels") || !resp["labels"].is_array()) {
      raise(ErrorKind::kProtocolViolation, "classify response lacks a 'labels' array");
    }
    const auto& arr = resp["labels"];
    if (arr.size() != expected) {
      raise(ErrorKind::kProtocolViolation, "classify returned " + std::to_string(arr.size()) + " labels for " +
                                               std::to_string(expected) + " texts");
    }
    std::vector<std::string> out;
    for (const auto& l : arr) {
      if (!l.is_string()) raise(ErrorKind::kProtocolViolation, "classify label is not a string");
      out.push_back(l.get<std::string>());
    }
    return out;
  }

  static std::vector<Candidate> parse_fill_mask_response(const nlohmann::json& resp, std::size_t top_k) {
    if (!resp.is_object() || !resp.contains("candidates") || !resp["candidates"].is_array()) {
      raise(ErrorKind::kProtocolViolation, "fill_mask response lacks a 'candidates' array");
    }
    const auto& arr = resp["candidates"];
    if (arr.size() > top_k) {
      raise(ErrorKind::kProtocolViolation, "fill_mask returned more than top_k candidates");
    }
    std::vector<Candidate> out;
    for (const auto& c : arr) {
      if (!c.is_object() || !c.contains("token") || !c["token"].is_string() || !c.contains("score") ||
          !c["score"].is_number()) {
        raise(ErrorKind::kProtocolViolation, "malformed fill_mask candidate");
      }
      const double score = c["score"].get<double>();
      if (!(score >= 0.0 && score <= 1.0)) raise(ErrorKind::kProtocolViolation, "candidate score outside [0,1]");
      if (!out.empty() && score > out.back().score) {
        raise(ErrorKind::kProtocolViolation, "candidate scores are not non-increasing");
      }
      out.push_back({c["token"].get<std::string>(), score});
    }
    return out;
  }

  static OracleInfo parse_info_response(const nlohmann::json& resp) {
    try {
      return {resp.at("name").get<std::string>(), resp.at("labels").get<std::vector<std::string>>(),
              resp.at("fingerprint").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorKind::kProtocolViolation, std::string("bad info response: ") + e.what());
    }
  }

 private:
  const OracleInfo& cached_info() {
    std::lock_guard lock(info_mu_);
    if (!info_) info_ = parse_info_response(get("/v1/info"));
    return *info_;
  }

  nlohmann::json get(const std::string& path) {
    return request([&] { return client_->Get(prefix_ + path); }, path);
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& body) {
    const std::string payload = body.dump();
    return request([&] { return client_->Post(prefix_ + path, payload, "application/json"); }, path);
  }

  template <typename Send>
  nlohmann::json request(Send&& send, const std::string& path) {
    std::string last_error;
    auto delay = options_.backoff;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
      httplib::Result res = send();
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      auto parsed = nlohmann::json::parse(res->body, nullptr, false);
      if (parsed.is_discarded()) raise(ErrorKind::kProtocolViolation, path + " returned a non-JSON body");
      return parsed;
    }
    raise(ErrorKind::kRemoteUnavailable, url_ + path + ": " + last_error);
  }

  std::string url_;
  std::string prefix_;
  RemoteOptions options_;
  std::unique_ptr<httplib::Client> client_;
  std::mutex info_mu_;
  std::optional<OracleInfo> info_;
};

}  // namespace smab
