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

// The two black boxes the estimator queries: a label-predicting classifier
// and a mask-filling perturber. Synthetic in-process implementations live
// here too; they give planted, analytically known sensitivities.

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smab/errors.hpp"
#include "smab/hash.hpp"
#include "smab/text.hpp"

namespace smab {

inline constexpr std::string_view kMaskToken = "[MASK]";

struct Candidate {
  std::string token;
  double score = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct OracleInfo {
  std::string name;
  std::vector<std::string> labels;
  std::string fingerprint;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::vector<std::string> classify(std::span<const std::string> texts) = 0;
  virtual OracleInfo info() = 0;
};

/// A fill-mask query. `original` is the word that was masked; real masked
/// language models ignore it, scripted perturbers key on it.
struct MaskQuery {
  std::string text;
  std::size_t top_k = 10;
  std::optional<std::string> original;
};

class Perturber {
 public:
  virtual ~Perturber() = default;
  virtual std::vector<Candidate> fill_mask(const MaskQuery& query) = 0;

  /// Fills every mask of `masked_text` at once, producing up to `count`
  /// complete texts. Perturbers without joint support return nullopt.
  virtual std::optional<std::vector<std::string>> fill_joint(std::string_view masked_text,
                                                             std::span<const std::string> originals,
                                                             std::size_t count) {
    (void)masked_text;
    (void)originals;
    (void)count;
    return std::nullopt;
  }

  virtual OracleInfo info() = 0;
};

/// Classifies `texts`, enforcing one label per text.
inline std::vector<std::string> classify(Classifier& classifier, std::span<const std::string> texts) {
  if (texts.empty()) return {};
  std::vector<std::string> labels = classifier.classify(texts);
  if (labels.size() != texts.size()) {
    raise(ErrorKind::kProtocolViolation, "classifier returned " + std::to_string(labels.size()) +
                                             " labels for " + std::to_string(texts.size()) + " texts");
  }
  return labels;
}

inline void require_single_mask(std::string_view masked_text) {
  const std::size_t n = text::count_occurrences(masked_text, kMaskToken);
  if (n != 1) {
    raise(ErrorKind::kBadMaskCount, "expected exactly one " + std::string(kMaskToken) + ", found " +
                                        std::to_string(n));
  }
}

/// Validated fill-mask: exactly one placeholder, at most `top_k` candidates
/// in non-increasing score order.
inline std::vector<Candidate> fill_mask(Perturber& perturber, const MaskQuery& query) {
  require_single_mask(query.text);
  if (query.top_k == 0) raise(ErrorKind::kDomain, "top_k must be positive");
  std::vector<Candidate> out = perturber.fill_mask(query);
  if (out.size() > query.top_k) out.resize(query.top_k);
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].score > out[i - 1].score) {
      raise(ErrorKind::kProtocolViolation, "fill_mask candidates are not sorted by descending score");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic oracles

/// Binary classifier that emits `default_label` unless the summed weights of
/// the distinct trigger words present reach `threshold`, in which case it
/// emits the other label.
class SyntheticLexiconClassifier final : public Classifier {
 public:
  SyntheticLexiconClassifier(std::vector<std::string> labels, std::string default_label,
                             std::map<std::string, double> lexicon, double threshold = 1.0,
                             std::string name = "lexicon")
      : labels_(std::move(labels)),
        default_label_(std::move(default_label)),
        lexicon_(std::move(lexicon)),
        threshold_(threshold),
        name_(std::move(name)) {
    if (labels_.size() != 2) raise(ErrorKind::kConfig, "lexicon classifier needs exactly two labels");
    if (default_label_ != labels_[0] && default_label_ != labels_[1]) {
      raise(ErrorKind::kConfig, "default label '" + default_label_ + "' is not in the label set");
    }
    flipped_label_ = default_label_ == labels_[0] ? labels_[1] : labels_[0];
    for (const auto& [w, weight] : lexicon_) {
      if (weight < 0.0 || weight > 1.0) raise(ErrorKind::kDomain, "flip weight for '" + w + "' outside [0,1]");
    }
  }

  std::string predict(std::string_view input) const {
    std::set<std::string> present;
    for (const auto& tok : text::tokenize(input)) present.insert(text::to_lower(tok.text));
    double total = 0.0;
    for (const auto& w : present) {
      if (auto it = lexicon_.find(w); it != lexicon_.end()) total += it->second;
    }
    return total >= threshold_ ? flipped_label_ : default_label_;
  }

  std::vector<std::string> classify(std::span<const std::string> texts) override {
    std::vector<std::string> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(predict(t));
    return out;
  }

  OracleInfo info() override { return {name_, labels_, fingerprint()}; }

  nlohmann::json spec() const {
    return {{"labels", labels_}, {"default_label", default_label_}, {"lexicon", lexicon_}, {"threshold", threshold_}};
  }

  std::string fingerprint() const { return "synthetic-lexicon:" + sha256_hex(spec().dump()); }

  const std::string& default_label() const { return default_label_; }
  const std::string& flipped_label() const { return flipped_label_; }

 private:
  std::vector<std::string> labels_;
  std::string default_label_;
  std::string flipped_label_;
  std::map<std::string, double> lexicon_;
  double threshold_;
  std::string name_;
};

/// Deterministic table-driven perturber. Lookup order: exact masked-text
/// context, then the masked word; unknown words come back unchanged.
class ScriptedPerturber final : public Perturber {
 public:
  explicit ScriptedPerturber(std::map<std::string, std::vector<std::string>> replacements,
                             std::map<std::string, std::vector<std::string>> contexts = {},
                             std::string name = "scripted")
      : replacements_(std::move(replacements)), contexts_(std::move(contexts)), name_(std::move(name)) {}

  std::vector<Candidate> fill_mask(const MaskQuery& query) override {
    return with_scores(candidates_for(query.text, query.original, query.top_k));
  }

  std::optional<std::vector<std::string>> fill_joint(std::string_view masked_text,
                                                     std::span<const std::string> originals,
                                                     std::size_t count) override {
    const std::size_t masks = text::count_occurrences(masked_text, kMaskToken);
    if (masks != originals.size()) {
      raise(ErrorKind::kBadMaskCount, "joint fill has " + std::to_string(masks) + " masks but " +
                                          std::to_string(originals.size()) + " originals");
    }
    std::vector<std::vector<std::string>> lists;
    std::size_t n = count;
    for (const auto& original : originals) {
      lists.push_back(candidates_for({}, original, count));
      n = std::min(n, lists.back().size());
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
      std::string filled;
      std::size_t pos = 0, j = 0;
      for (std::size_t hit = masked_text.find(kMaskToken); hit != std::string_view::npos;
           hit = masked_text.find(kMaskToken, pos)) {
        filled.append(masked_text.substr(pos, hit - pos));
        filled.append(lists[j++][i]);
        pos = hit + kMaskToken.size();
      }
      filled.append(masked_text.substr(pos));
      out.push_back(std::move(filled));
    }
    return out;
  }

  OracleInfo info() override { return {name_, {}, fingerprint()}; }

  nlohmann::json spec() const { return {{"replacements", replacements_}, {"contexts", contexts_}}; }

  std::string fingerprint() const { return "scripted:" + sha256_hex(spec().dump()); }

 private:
  std::vector<std::string> candidates_for(std::string_view masked_text, const std::optional<std::string>& original,
                                          std::size_t k) const {
    std::vector<std::string> out;
    if (!masked_text.empty()) {
      if (auto it = contexts_.find(std::string(masked_text)); it != contexts_.end()) out = it->second;
    }
    if (out.empty() && original) {
      if (auto it = replacements_.find(text::to_lower(*original)); it != replacements_.end()) {
        out = it->second;
      } else {
        out.assign(k, *original);
      }
    }
    if (out.size() > k) out.resize(k);
    return out;
  }

  static std::vector<Candidate> with_scores(const std::vector<std::string>& words) {
    std::vector<Candidate> out;
    out.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) out.push_back({words[i], 1.0 / static_cast<double>(i + 1)});
    return out;
  }

  std::map<std::string, std::vector<std::string>> replacements_;
  std::map<std::string, std::vector<std::string>> contexts_;
  std::string name_;
};

/// A synthetic oracle pair plus optional keyphrase table, as described by a
/// JSON spec file:
///
///   {"name": "...", "labels": ["pos","neg"], "default_label": "pos",
///    "threshold": 1.0, "lexicon": {"awful": 1.0},
///    "replacements": {"good": ["great","fine"]},
///    "contexts": {"a [MASK] film": ["nice"]},
///    "keyphrases": {"some text": [["key","phrase"]]}}
struct SyntheticSpec {
  std::string name = "synthetic";
  std::vector<std::string> labels{"pos", "neg"};
  std::string default_label = "pos";
  double threshold = 1.0;
  std::map<std::string, double> lexicon;
  std::map<std::string, std::vector<std::string>> replacements;
  std::map<std::string, std::vector<std::string>> contexts;
  std::map<std::string, std::vector<std::vector<std::string>>> keyphrases;

  SyntheticLexiconClassifier make_classifier() const {
    return SyntheticLexiconClassifier(labels, default_label, lexicon, threshold, name);
  }
  ScriptedPerturber make_perturber() const { return ScriptedPerturber(replacements, contexts, name); }
};

inline nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"name", s.name},         {"labels", s.labels},   {"default_label", s.default_label},
          {"threshold", s.threshold}, {"lexicon", s.lexicon}, {"replacements", s.replacements},
          {"contexts", s.contexts},   {"keyphrases", s.keyphrases}};
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  try {
    SyntheticSpec s;
    s.name = j.value("name", s.name);
    if (j.contains("labels")) s.labels = j.at("labels").get<std::vector<std::string>>();
    s.default_label = j.value("default_label", s.labels.empty() ? std::string() : s.labels.front());
    s.threshold = j.value("threshold", 1.0);
    if (j.contains("lexicon")) s.lexicon = j.at("lexicon").get<std::map<std::string, double>>();
    if (j.contains("replacements")) {
      s.replacements = j.at("replacements").get<std::map<std::string, std::vector<std::string>>>();
    }
    if (j.contains("contexts")) s.contexts = j.at("contexts").get<std::map<std::string, std::vector<std::string>>>();
    if (j.contains("keyphrases")) {
      s.keyphrases = j.at("keyphrases").get<std::map<std::string, std::vector<std::vector<std::string>>>>();
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kParse, std::string("malformed synthetic spec: ") + e.what());
  }
}

}  // namespace smab
