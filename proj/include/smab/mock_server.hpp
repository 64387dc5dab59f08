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

#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "smab/errors.hpp"
#include "smab/oracle.hpp"

namespace smab {

/// Serves a SyntheticSpec over the oracle wire protocol.
class MockServer {
 public:
  explicit MockServer(SyntheticSpec spec)
      : spec_(std::move(spec)), classifier_(spec_.make_classifier()), perturber_(spec_.make_perturber()) {
    server_.Get("/v1/info", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, handle_info());
    });
    server_.Post("/v1/classify", [this](const httplib::Request& req, httplib::Response& res) {
      dispatch(req, res, [this](const nlohmann::json& body) { return handle_classify(body); });
    });
    server_.Post("/v1/fill_mask", [this](const httplib::Request& req, httplib::Response& res) {
      dispatch(req, res, [this](const nlohmann::json& body) { return handle_fill_mask(body); });
    });
    server_.Post("/v1/keyphrases", [this](const httplib::Request& req, httplib::Response& res) {
      dispatch(req, res, [this](const nlohmann::json& body) { return handle_keyphrases(body); });
    });
  }

  ~MockServer() { stop(); }

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  nlohmann::json handle_info() {
    const OracleInfo meta = classifier_.info();
    return {{"name", meta.name}, {"labels", meta.labels}, {"fingerprint", meta.fingerprint}};
  }

  nlohmann::json handle_classify(const nlohmann::json& body) {
    const auto texts = body.at("texts").get<std::vector<std::string>>();
    std::lock_guard lock(mu_);
    return {{"labels", classifier_.classify(texts)}};
  }

  nlohmann::json handle_fill_mask(const nlohmann::json& body) {
    MaskQuery q;
    q.text = body.at("text").get<std::string>();
    q.top_k = body.at("top_k").get<std::size_t>();
    if (body.contains("original") && body["original"].is_string()) q.original = body["original"].get<std::string>();
    const std::string mask = body.value("mask_token", std::string(kMaskToken));
    if (mask != kMaskToken) raise(ErrorKind::kBadMaskCount, "unsupported mask token '" + mask + "'");
    std::lock_guard lock(mu_);
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : fill_mask(perturber_, q)) cands.push_back({{"token", c.token}, {"score", c.score}});
    return {{"candidates", std::move(cands)}};
  }

  nlohmann::json handle_keyphrases(const nlohmann::json& body) {
    const auto input = body.at("text").get<std::string>();
    auto it = spec_.keyphrases.find(input);
    nlohmann::json phrases = it == spec_.keyphrases.end() ? nlohmann::json::array() : nlohmann::json(it->second);
    return {{"keyphrases", std::move(phrases)}};
  }

  /// Binds to `port` (0 picks a free one) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) raise(ErrorKind::kIo, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  /// Blocks serving requests until stop() is called from another thread.
  /// `on_bound` sees the bound port (useful with port 0) before serving starts.
  void serve(const std::string& host, int port, const std::function<void(int)>& on_bound = {}) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) raise(ErrorKind::kIo, "cannot bind " + host + ":" + std::to_string(port));
    if (on_bound) on_bound(bound);
    if (!server_.listen_after_bind()) raise(ErrorKind::kIo, "server on " + host + ":" + std::to_string(bound) + " failed");
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  template <typename Handler>
  void dispatch(const httplib::Request& req, httplib::Response& res, Handler&& handler) {
    auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      fail(res, "malformed JSON body");
      return;
    }
    try {
      reply(res, handler(body));
    } catch (const nlohmann::json::exception& e) {
      fail(res, e.what());
    } catch (const Error& e) {
      fail(res, e.what());
    }
  }

  static void reply(httplib::Response& res, const nlohmann::json& body) {
    res.status = 200;
    res.set_content(body.dump(), "application/json");
  }

  static void fail(httplib::Response& res, const std::string& message) {
    res.status = 400;
    res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
  }

  SyntheticSpec spec_;
  SyntheticLexiconClassifier classifier_;
  ScriptedPerturber perturber_;
  std::mutex mu_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace smab
