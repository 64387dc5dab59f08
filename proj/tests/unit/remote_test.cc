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


#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "smab/config.hpp"
#include "smab/mock_server.hpp"
#include "smab/remote.hpp"
#include "support/canned_server.hpp"

namespace smab {
namespace {

const std::string kFixtures = SMAB_FIXTURE_DIR "/protocol/";

nlohmann::json load(const std::string& name) { return nlohmann::json::parse(read_file(kFixtures + name)); }

RemoteOptions fast_options() {
  RemoteOptions o;
  o.retries = 1;
  o.backoff = std::chrono::milliseconds(1);
  o.timeout = std::chrono::seconds(5);
  return o;
}

std::string url_for(int port) { return "http://127.0.0.1:" + std::to_string(port); }

using testing::CannedServer;

TEST(Protocol, MockHandlersReproduceGoldenExchanges) {
  const auto spec = synthetic_spec_from_json(load("spec.json"));
  MockServer server(spec);
  for (const auto& ex : load("exchanges.json")) {
    const std::string path = ex.at("path");
    nlohmann::json got;
    if (path == "/v1/classify") got = server.handle_classify(ex.at("request"));
    else if (path == "/v1/fill_mask") got = server.handle_fill_mask(ex.at("request"));
    else if (path == "/v1/keyphrases") got = server.handle_keyphrases(ex.at("request"));
    else got = server.handle_info();
    EXPECT_EQ(got, ex.at("response")) << ex.at("name");
  }
}

TEST(Protocol, ClientParsesGoldenResponses) {
  for (const auto& ex : load("exchanges.json")) {
    const std::string path = ex.at("path");
    const auto& resp = ex.at("response");
    if (path == "/v1/classify") {
      EXPECT_EQ(RemoteOracle::parse_classify_response(resp, ex["request"]["texts"].size()).size(),
                ex["request"]["texts"].size());
    } else if (path == "/v1/fill_mask") {
      const auto cands = RemoteOracle::parse_fill_mask_response(resp, ex["request"]["top_k"]);
      EXPECT_EQ(cands.size(), resp["candidates"].size());
    } else if (path == "/v1/info") {
      EXPECT_EQ(RemoteOracle::parse_info_response(resp).labels, (std::vector<std::string>{"pos", "neg"}));
    }
  }
}

TEST(Protocol, RoundTripOverHttp) {
  const auto spec = synthetic_spec_from_json(load("spec.json"));
  MockServer server(spec);
  const int port = server.start();
  RemoteOracle remote(url_for(port), fast_options());
  auto local = spec.make_classifier();
  auto local_p = spec.make_perturber();

  const std::vector<std::string> texts{"an awful film", "a good film", "AWFUL", "fine"};
  EXPECT_EQ(classify(remote, texts), classify(local, texts));
  const auto info = remote.info();
  EXPECT_EQ(info.name, "golden");
  EXPECT_EQ(info.fingerprint, local.info().fingerprint);

  const auto remote_c = fill_mask(remote, {"a [MASK] film", 2, "good"});
  const auto local_c = fill_mask(local_p, {"a [MASK] film", 2, "good"});
  ASSERT_EQ(remote_c.size(), local_c.size());
  for (std::size_t i = 0; i < local_c.size(); ++i) {
    EXPECT_EQ(remote_c[i].token, local_c[i].token);
    EXPECT_EQ(remote_c[i].score, local_c[i].score);
  }
  EXPECT_EQ(remote.keyphrases("a good film"), (std::vector<std::vector<std::string>>{{"good", "film"}}));
}

TEST(Protocol, ClassifyIsBatched) {
  const auto spec = synthetic_spec_from_json(load("spec.json"));
  MockServer server(spec);
  auto opts = fast_options();
  opts.batch_size = 3;
  RemoteOracle remote(url_for(server.start()), opts);
  std::vector<std::string> texts;
  for (int i = 0; i < 10; ++i) texts.push_back(i % 3 == 0 ? "awful " + std::to_string(i) : "ok");
  const auto labels = classify(remote, texts);
  ASSERT_EQ(labels.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(labels[i], i % 3 == 0 ? "neg" : "pos");
}

TEST(Protocol, MockRejectsMalformedRequests) {
  const auto spec = synthetic_spec_from_json(load("spec.json"));
  MockServer server(spec);
  httplib::Client client(url_for(server.start()));
  auto bad = client.Post("/v1/classify", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(nlohmann::json::parse(bad->body).contains("error"));
  auto two_masks = client.Post("/v1/fill_mask", R"({"text":"[MASK] [MASK]","mask_token":"[MASK]","top_k":2})",
                               "application/json");
  ASSERT_TRUE(two_masks);
  EXPECT_EQ(two_masks->status, 400);
  auto no_texts = client.Post("/v1/classify", R"({"text":"x"})", "application/json");
  ASSERT_TRUE(no_texts);
  EXPECT_EQ(no_texts->status, 400);
}

TEST(Protocol, MalformedResponsesAreViolations) {
  CannedServer canned;
  for (const auto& c : load("malformed.json")) {
    const std::string path = c.at("path");
    canned.set(path, c.at("body"));
    RemoteOracle remote(url_for(canned.port()), fast_options());
    try {
      if (path == "/v1/classify") {
        classify(remote, std::vector<std::string>(c.at("texts").get<std::size_t>(), "x"));
      } else if (path == "/v1/fill_mask") {
        fill_mask(remote, {"a [MASK]", c.at("top_k").get<std::size_t>(), std::nullopt});
      } else if (path == "/v1/info") {
        remote.info();
      } else {
        remote.keyphrases("x");
      }
      ADD_FAILURE() << "accepted " << c.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kProtocolViolation) << c.dump() << ": " << e.what();
    }
    canned.clear(path);
  }
}

TEST(Protocol, Non200IsRetriedThenUnavailable) {
  CannedServer canned;
  canned.set("/v1/classify", R"({"error":"busy"})", 503);
  auto opts = fast_options();
  opts.retries = 3;
  RemoteOracle remote(url_for(canned.port()), opts);
  try {
    classify(remote, std::vector<std::string>{"x"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kRemoteUnavailable);
    EXPECT_TRUE(is_oracle_error(e.kind()));
  }
  EXPECT_EQ(canned.hits.load(), 4);
}

TEST(Protocol, UnreachableEndpoint) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  RemoteOptions opts = fast_options();
  opts.retries = 0;
  RemoteOracle remote(url_for(port), opts);
  try {
    remote.info();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kRemoteUnavailable);
  }
}

TEST(Protocol, PathPrefixIsKept) {
  httplib::Server server;
  server.Get("/api/v1/info", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"name":"prefixed","labels":["a","b"],"fingerprint":"p"})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  RemoteOracle remote(url_for(port) + "/api/", fast_options());
  EXPECT_EQ(remote.info().name, "prefixed");
  server.stop();
  t.join();
}

TEST(Protocol, OracleSetResolvesDescriptors) {
  const auto spec = synthetic_spec_from_json(load("spec.json"));
  MockServer server(spec);
  const std::string url = url_for(server.start());
  OracleSet remote_set(url, "", fast_options());
  EXPECT_NE(remote_set.remote(url), nullptr);
  EXPECT_EQ(classify(remote_set.classifier(), std::vector<std::string>{"awful"}), std::vector<std::string>{"neg"});

  OracleSet synthetic_set("synthetic:" + kFixtures + "spec.json", "", fast_options());
  EXPECT_NE(synthetic_set.synthetic("synthetic:" + kFixtures + "spec.json"), nullptr);
  EXPECT_EQ(classify(synthetic_set.classifier(), std::vector<std::string>{"awful"}), std::vector<std::string>{"neg"});

  EXPECT_THROW(OracleSet("ftp://x", "", fast_options()), Error);
  EXPECT_THROW(OracleSet("", "", fast_options()), Error);
}

}  // namespace
}  // namespace smab
