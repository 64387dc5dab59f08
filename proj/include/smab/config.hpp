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

// Flat `key = value` run configuration shared by the command-line tools, and
// construction of oracle endpoints from `synthetic:<spec.json>` or
// `http://host:port` descriptors.

#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <json.hpp>

#include "smab/cache.hpp"
#include "smab/corpus.hpp"
#include "smab/engine.hpp"
#include "smab/errors.hpp"
#include "smab/oracle.hpp"
#include "smab/remote.hpp"
#include "smab/text.hpp"

namespace smab {

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view help;
};

inline constexpr std::array<ConfigKey, 39> kConfigKeys{{
    {"corpus", "", "corpus file (JSONL or CSV)"},
    {"corpus_format", "auto", "jsonl | csv | auto (by extension)"},
    {"index", "", "arm index JSON path"},
    {"report", "", "sensitivity report output path"},
    {"checkpoint", "", "checkpoint path (written every checkpoint_every steps and before aborting)"},
    {"cache_dir", "", "on-disk oracle response cache directory (empty disables caching)"},
    {"classifier", "", "classifier endpoint: synthetic:<spec.json> or http://host:port"},
    {"perturber", "", "fill-mask endpoint: synthetic:<spec.json> or http://host:port (defaults to classifier)"},
    {"iterations", "200000", "total bandit steps T (steps with no valid perturbation count)"},
    {"strategy", "thompson", "outer-arm selection: ucb1 | thompson"},
    {"reward_mode", "mode_frequency", "local reward: gold | mode_frequency"},
    {"combine", "convex", "single (one occurrence) | convex (random pick mixed with best probe)"},
    {"epsilon", "0.9", "convex weight on the random pick, in (0,1)"},
    {"n_repl", "10", "fill-mask candidates requested per occurrence"},
    {"inner_probe", "2", "occurrences probed per convex step, random pick included; 0 = all"},
    {"init_scheme", "beta", "initial global sensitivity: beta | clipped_normal"},
    {"init_mean", "0", "clipped_normal mean"},
    {"init_sd", "1", "clipped_normal standard deviation"},
    {"init_low", "0", "clipped_normal lower bound"},
    {"init_high", "0.1", "clipped_normal upper bound"},
    {"init_alpha_low", "0", "beta scheme: lower bound of alpha0"},
    {"init_alpha_high", "0.5", "beta scheme: upper bound of alpha0"},
    {"binarize_reward", "false", "map every positive local sensitivity to 1"},
    {"l_star_mode", "running_max", "regret oracle: running_max | exhaustive"},
    {"seed", "0", "seed for every random draw"},
    {"checkpoint_every", "0", "checkpoint period in steps (0 = only before aborting)"},
    {"regret_points", "10000", "max regret samples kept in the report"},
    {"full_regret", "", "optional CSV path for the full regret trace"},
    {"record_timing", "false", "add wall-clock time to the report counters"},
    {"lowercase", "true", "lowercase tokens before indexing"},
    {"strip_urls", "true", "drop http(s):// and www. chunks"},
    {"stopwords", "none", "none | builtin | <path to one-word-per-line file>"},
    {"lemma_table", "", "TSV word<TAB>lemma table (empty disables lemmatization)"},
    {"min_freq", "1", "minimum occurrences for a word to become an arm"},
    {"max_arms", "0", "keep only the most frequent N words (0 = no cap)"},
    {"batch_size", "32", "texts per remote classify request"},
    {"retries", "3", "remote retries (exponential backoff from backoff_ms)"},
    {"backoff_ms", "250", "initial retry backoff in milliseconds"},
    {"timeout_s", "30", "remote request timeout in seconds"},
}};

class FlatConfig {
 public:
  FlatConfig() {
    for (const auto& k : kConfigKeys) values_[std::string(k.name)] = std::string(k.default_value);
  }

  static bool known(std::string_view key) {
    for (const auto& k : kConfigKeys) {
      if (k.name == key) return true;
    }
    return false;
  }

  /// Parses `key = value` lines. Values may be bare or double-quoted;
  /// `#` starts a comment outside quotes.
  void parse(std::string_view content, std::string_view origin = "config") {
    std::size_t line_no = 0, pos = 0;
    while (pos <= content.size()) {
      std::size_t nl = content.find('\n', pos);
      if (nl == std::string_view::npos) nl = content.size();
      std::string_view line = content.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      const std::string where = std::string(origin) + " line " + std::to_string(line_no);
      line = text::trim(line);
      if (!line.empty() && line.front() != '#' && line.front() != '[') {
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) raise(ErrorKind::kConfig, where + ": expected key = value");
        const std::string key(text::trim(line.substr(0, eq)));
        set(key, parse_value(text::trim(line.substr(eq + 1)), where));
      }
      if (nl == content.size()) break;
    }
  }

  void set(const std::string& key, std::string value) {
    if (!known(key)) raise(ErrorKind::kConfig, "unknown config key '" + key + "'");
    values_[key] = std::move(value);
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }

  bool boolean(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    raise(ErrorKind::kConfig, key + ": expected a boolean, got '" + v + "'");
  }

  std::uint64_t uint(const std::string& key) const {
    const std::string& v = str(key);
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
      raise(ErrorKind::kConfig, key + ": expected a non-negative integer, got '" + v + "'");
    }
    return out;
  }

  double real(const std::string& key) const {
    const std::string& v = str(key);
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
      raise(ErrorKind::kConfig, key + ": expected a number, got '" + v + "'");
    }
    return out;
  }

  PreprocessConfig preprocess_config() const {
    PreprocessConfig cfg;
    cfg.lowercase = boolean("lowercase");
    cfg.strip_urls = boolean("strip_urls");
    const std::string& sw = str("stopwords");
    if (sw == "builtin") {
      cfg.stopwords = builtin_stopwords();
    } else if (!sw.empty() && sw != "none") {
      cfg.stopwords = load_stopwords(sw);
    }
    if (cfg.lowercase) {
      std::set<std::string> lowered;
      for (const auto& w : cfg.stopwords) lowered.insert(text::to_lower(w));
      cfg.stopwords = std::move(lowered);
    }
    if (!str("lemma_table").empty()) cfg.lemmas = load_lemma_table(str("lemma_table"));
    cfg.min_freq = uint("min_freq");
    if (const auto cap = uint("max_arms"); cap > 0) cfg.max_arms = cap;
    return cfg;
  }

  RunConfig run_config() const {
    RunConfig cfg;
    cfg.iterations = uint("iterations");
    cfg.strategy = parse_strategy(str("strategy"));
    cfg.reward_mode = parse_reward_mode(str("reward_mode"));
    cfg.combine = parse_combine(str("combine"));
    cfg.epsilon = real("epsilon");
    cfg.n_repl = uint("n_repl");
    cfg.inner_probe = uint("inner_probe");
    cfg.init_scheme = parse_init_scheme(str("init_scheme"));
    cfg.init = {real("init_mean"), real("init_sd"),        real("init_low"),
                real("init_high"), real("init_alpha_low"), real("init_alpha_high")};
    cfg.binarize_reward = boolean("binarize_reward");
    cfg.l_star_mode = parse_l_star_mode(str("l_star_mode"));
    cfg.seed = uint("seed");
    cfg.checkpoint_every = uint("checkpoint_every");
    cfg.checkpoint_path = str("checkpoint");
    cfg.regret_points = uint("regret_points");
    cfg.record_timing = boolean("record_timing");
    cfg.validate();
    return cfg;
  }

  RemoteOptions remote_options() const {
    RemoteOptions o;
    o.batch_size = uint("batch_size");
    o.retries = static_cast<int>(uint("retries"));
    o.backoff = std::chrono::milliseconds(uint("backoff_ms"));
    o.timeout = std::chrono::seconds(uint("timeout_s"));
    return o;
  }

  CorpusFormat corpus_format(const std::string& path) const {
    const std::string& f = str("corpus_format");
    return f == "auto" ? corpus_format_for_path(path) : parse_corpus_format(f);
  }

 private:
  static std::string parse_value(std::string_view raw, const std::string& where) {
    if (!raw.empty() && raw.front() == '"') {
      std::string out;
      std::size_t i = 1;
      for (; i < raw.size() && raw[i] != '"'; ++i) {
        if (raw[i] == '\\' && i + 1 < raw.size()) {
          const char c = raw[++i];
          out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
        } else {
          out += raw[i];
        }
      }
      if (i >= raw.size()) raise(ErrorKind::kConfig, where + ": unterminated string");
      const auto rest = text::trim(raw.substr(i + 1));
      if (!rest.empty() && rest.front() != '#') raise(ErrorKind::kConfig, where + ": trailing characters after string");
      return out;
    }
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    return std::string(text::trim(raw));
  }

  std::map<std::string, std::string> values_;
};

inline FlatConfig load_flat_config(const std::string& path) {
  FlatConfig cfg;
  if (!path.empty()) cfg.parse(read_file(path), path);
  return cfg;
}

inline SyntheticSpec load_synthetic_spec(const std::string& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) raise(ErrorKind::kParse, "synthetic spec " + path + " is not valid JSON");
  return synthetic_spec_from_json(j);
}

/// Owns the classifier and perturber named by two endpoint descriptors,
/// optionally wrapped in a shared on-disk cache.
class OracleSet {
 public:
  OracleSet(const std::string& classifier_desc, const std::string& perturber_desc, const RemoteOptions& remote,
            const std::string& cache_dir = {}) {
    if (classifier_desc.empty()) raise(ErrorKind::kConfig, "no classifier endpoint configured");
    classifier_ = &resolve_classifier(classifier_desc, remote);
    perturber_ = &resolve_perturber(perturber_desc.empty() ? classifier_desc : perturber_desc, remote);
    if (!cache_dir.empty()) {
      cache_ = std::make_unique<DiskCache>(cache_dir);
      cached_classifier_ = std::make_unique<CachingClassifier>(*classifier_, *cache_);
      cached_perturber_ = std::make_unique<CachingPerturber>(*perturber_, *cache_);
      classifier_ = cached_classifier_.get();
      perturber_ = cached_perturber_.get();
    }
  }

  Classifier& classifier() { return *classifier_; }
  Perturber& perturber() { return *perturber_; }

  /// The remote endpoint behind `desc`, if it is one.
  RemoteOracle* remote(const std::string& desc) {
    auto it = remotes_.find(desc);
    return it == remotes_.end() ? nullptr : it->second.get();
  }

  const SyntheticSpec* synthetic(const std::string& desc) const {
    auto it = specs_.find(desc);
    return it == specs_.end() ? nullptr : &it->second;
  }

 private:
  static constexpr std::string_view kSyntheticPrefix = "synthetic:";

  Classifier& resolve_classifier(const std::string& desc, const RemoteOptions& remote) {
    if (desc.starts_with(kSyntheticPrefix)) {
      auto [it, inserted] = synth_classifiers_.try_emplace(desc, nullptr);
      if (inserted) it->second = std::make_unique<SyntheticLexiconClassifier>(spec_for(desc).make_classifier());
      return *it->second;
    }
    return remote_for(desc, remote);
  }

  Perturber& resolve_perturber(const std::string& desc, const RemoteOptions& remote) {
    if (desc.starts_with(kSyntheticPrefix)) {
      auto [it, inserted] = synth_perturbers_.try_emplace(desc, nullptr);
      if (inserted) it->second = std::make_unique<ScriptedPerturber>(spec_for(desc).make_perturber());
      return *it->second;
    }
    return remote_for(desc, remote);
  }

  const SyntheticSpec& spec_for(const std::string& desc) {
    auto it = specs_.find(desc);
    if (it == specs_.end()) it = specs_.emplace(desc, load_synthetic_spec(desc.substr(kSyntheticPrefix.size()))).first;
    return it->second;
  }

  RemoteOracle& remote_for(const std::string& desc, const RemoteOptions& remote) {
    if (!desc.starts_with("http://") && !desc.starts_with("https://")) {
      raise(ErrorKind::kConfig, "endpoint '" + desc + "' is neither synthetic:<spec> nor an http(s) URL");
    }
    auto [it, inserted] = remotes_.try_emplace(desc, nullptr);
    if (inserted) it->second = std::make_unique<RemoteOracle>(desc, remote);
    return *it->second;
  }

  std::map<std::string, SyntheticSpec> specs_;
  std::map<std::string, std::unique_ptr<SyntheticLexiconClassifier>> synth_classifiers_;
  std::map<std::string, std::unique_ptr<ScriptedPerturber>> synth_perturbers_;
  std::map<std::string, std::unique_ptr<RemoteOracle>> remotes_;
  std::unique_ptr<DiskCache> cache_;
  std::unique_ptr<CachingClassifier> cached_classifier_;
  std::unique_ptr<CachingPerturber> cached_perturber_;
  Classifier* classifier_ = nullptr;
  Perturber* perturber_ = nullptr;
};

}  // namespace smab
