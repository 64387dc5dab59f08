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

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smab/errors.hpp"
#include "smab/hash.hpp"
#include "smab/oracle.hpp"

namespace smab {

/// Content-addressed, append-only oracle response cache. Entries live in
/// `<dir>/oracle-cache.jsonl`, one {"k": sha256, "v": response} per line.
class DiskCache {
 public:
  explicit DiskCache(std::filesystem::path dir) : path_(std::move(dir) / "oracle-cache.jsonl") {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
    if (ec) raise(ErrorKind::kIo, "cannot create cache dir " + path_.parent_path().string());
    std::ifstream in(path_);
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      auto rec = nlohmann::json::parse(line, nullptr, false);
      // a torn final line from an interrupted run is skipped
      if (rec.is_discarded() || !rec.contains("k") || !rec.contains("v")) continue;
      entries_[rec["k"].get<std::string>()] = rec["v"];
    }
    out_.open(path_, std::ios::app);
    if (!out_) raise(ErrorKind::kIo, "cannot open cache file " + path_.string());
  }

  static std::string key(const std::string& fingerprint, const nlohmann::json& request) {
    return sha256_hex(fingerprint + "\n" + request.dump());
  }

  std::optional<nlohmann::json> get(const std::string& k) const {
    std::lock_guard lock(mu_);
    if (auto it = entries_.find(k); it != entries_.end()) return it->second;
    return std::nullopt;
  }

  void put(const std::string& k, nlohmann::json value) {
    std::lock_guard lock(mu_);
    auto [it, inserted] = entries_.emplace(k, std::move(value));
    if (!inserted) return;
    out_ << nlohmann::json{{"k", k}, {"v", it->second}}.dump() << '\n';
    out_.flush();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, nlohmann::json> entries_;
  std::ofstream out_;
};

class CachingClassifier final : public Classifier {
 public:
  CachingClassifier(Classifier& inner, DiskCache& cache) : inner_(inner), cache_(cache) {}

  std::vector<std::string> classify(std::span<const std::string> texts) override {
    const std::string& fp = fingerprint();
    std::vector<std::string> out(texts.size());
    // key -> positions in `texts` still waiting for a label
    std::map<std::string, std::vector<std::size_t>> pending;
    std::vector<std::string> miss_keys;
    std::vector<std::string> misses;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      std::string k = DiskCache::key(fp, {{"op", "classify"}, {"text", texts[i]}});
      if (auto hit = cache_.get(k); hit && hit->is_string()) {
        out[i] = hit->get<std::string>();
        continue;
      }
      auto& slots = pending[k];
      if (slots.empty()) {
        miss_keys.push_back(k);
        misses.push_back(texts[i]);
      }
      slots.push_back(i);
    }
    if (!misses.empty()) {
      const auto labels = smab::classify(inner_, misses);
      for (std::size_t j = 0; j < misses.size(); ++j) {
        for (std::size_t i : pending[miss_keys[j]]) out[i] = labels[j];
        cache_.put(miss_keys[j], labels[j]);
      }
    }
    return out;
  }

  OracleInfo info() override { return inner_.info(); }

 private:
  const std::string& fingerprint() {
    if (!fingerprint_) fingerprint_ = inner_.info().fingerprint;
    return *fingerprint_;
  }

  Classifier& inner_;
  DiskCache& cache_;
  std::optional<std::string> fingerprint_;
};

class CachingPerturber final : public Perturber {
 public:
  CachingPerturber(Perturber& inner, DiskCache& cache) : inner_(inner), cache_(cache) {}

  std::vector<Candidate> fill_mask(const MaskQuery& query) override {
    if (!fingerprint_) fingerprint_ = inner_.info().fingerprint;
    nlohmann::json req{{"op", "fill_mask"}, {"text", query.text}, {"top_k", query.top_k}};
    if (query.original) req["original"] = *query.original;
    const std::string k = DiskCache::key(*fingerprint_, req);
    if (auto hit = cache_.get(k)) {
      std::vector<Candidate> out;
      for (const auto& c : *hit) out.push_back({c.at(0).get<std::string>(), c.at(1).get<double>()});
      return out;
    }
    auto out = inner_.fill_mask(query);
    nlohmann::json stored = nlohmann::json::array();
    for (const auto& c : out) stored.push_back({c.token, c.score});
    cache_.put(k, std::move(stored));
    return out;
  }

  std::optional<std::vector<std::string>> fill_joint(std::string_view masked_text,
                                                     std::span<const std::string> originals,
                                                     std::size_t count) override {
    return inner_.fill_joint(masked_text, originals, count);
  }

  OracleInfo info() override { return inner_.info(); }

 private:
  Perturber& inner_;
  DiskCache& cache_;
  std::optional<std::string> fingerprint_;
};

}  // namespace smab
