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

// Sample-replace-predict: mask one occurrence of a word, fill it with a
// perturber, re-classify, and turn the predictions into a local sensitivity.

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smab/corpus.hpp"
#include "smab/errors.hpp"
#include "smab/oracle.hpp"
#include "smab/text.hpp"

namespace smab {

struct PerturbedInstance {
  std::string replacement;
  std::string text;
  std::string label;
};

struct PerturbationBatch {
  std::string word;
  std::string doc_id;
  std::string original_label;
  std::vector<PerturbedInstance> instances;

  std::size_t valid_count() const { return instances.size(); }
};

enum class RewardMode { kGold, kModeFrequency };

inline RewardMode parse_reward_mode(std::string_view name) {
  if (name == "gold") return RewardMode::kGold;
  if (name == "mode_frequency" || name == "mode") return RewardMode::kModeFrequency;
  raise(ErrorKind::kConfig, "unknown reward mode '" + std::string(name) + "'");
}

inline std::string_view to_string(RewardMode m) { return m == RewardMode::kGold ? "gold" : "mode_frequency"; }

struct LocalReward {
  double value = 0.0;
  RewardMode mode = RewardMode::kModeFrequency;
  std::size_t support = 0;
};

/// Counts of fill-mask and classify traffic generated by the estimator.
struct OracleCounters {
  std::uint64_t fill_mask_calls = 0;
  std::uint64_t classify_calls = 0;
  std::uint64_t classify_texts = 0;

  friend bool operator==(const OracleCounters&, const OracleCounters&) = default;
};

/// Perturbs the occurrence `occurrence` of `word` in `doc`. Returns nullopt
/// when every candidate equals the original word.
inline std::optional<PerturbationBatch> try_perturb(const std::string& word, const Document& doc,
                                                    const Token& occurrence, std::size_t n_repl,
                                                    Perturber& perturber, Classifier& classifier, bool lowercase,
                                                    OracleCounters* counters = nullptr) {
  if (n_repl == 0) raise(ErrorKind::kDomain, "n_repl must be at least 1");
  const auto norm = [&](std::string_view s) { return lowercase ? text::to_lower(s) : std::string(s); };

  MaskQuery query{text::splice(doc.text, occurrence.span, kMaskToken), n_repl, occurrence.surface};
  const std::vector<Candidate> candidates = fill_mask(perturber, query);
  if (counters) ++counters->fill_mask_calls;

  const std::string original_norm = norm(occurrence.surface);
  const std::string word_norm = norm(word);
  PerturbationBatch batch{word, doc.id, {}, {}};
  std::vector<std::string> texts{doc.text};
  for (const Candidate& c : candidates) {
    const std::string cand = norm(c.token);
    if (cand == original_norm || cand == word_norm) continue;
    PerturbedInstance inst{c.token, text::splice(doc.text, occurrence.span, c.token), {}};
    texts.push_back(inst.text);
    batch.instances.push_back(std::move(inst));
  }
  if (batch.instances.empty()) return std::nullopt;

  const auto labels = classify(classifier, texts);
  if (counters) {
    ++counters->classify_calls;
    counters->classify_texts += texts.size();
  }
  batch.original_label = labels[0];
  for (std::size_t i = 0; i < batch.instances.size(); ++i) batch.instances[i].label = labels[i + 1];
  return batch;
}

/// Perturbs the token at `position` of the preprocessed document; throws
/// AllDiscarded when no valid instance survives.
inline PerturbationBatch perturb(const std::string& word, const Document& doc, std::size_t position,
                                 std::size_t n_repl, Perturber& perturber, Classifier& classifier,
                                 const PreprocessConfig& cfg) {
  const auto tokens = preprocess(doc.text, cfg);
  if (position >= tokens.size() || tokens[position].word != word) {
    raise(ErrorKind::kDomain, "'" + word + "' does not occur at position " + std::to_string(position) +
                                  " of document " + doc.id);
  }
  auto batch = try_perturb(word, doc, tokens[position], n_repl, perturber, classifier, cfg.lowercase);
  if (!batch) raise(ErrorKind::kAllDiscarded, "every replacement of '" + word + "' in " + doc.id + " was the word itself");
  return *std::move(batch);
}

/// Fraction of valid instances whose prediction differs from the gold label.
inline LocalReward reward_gold(const PerturbationBatch& batch, const std::optional<std::string>& gold) {
  if (!gold) raise(ErrorKind::kMissingGold, "document " + batch.doc_id + " has no gold label");
  if (batch.instances.empty()) raise(ErrorKind::kAllDiscarded, "empty perturbation batch");
  std::size_t mismatches = 0;
  for (const auto& inst : batch.instances) mismatches += inst.label != *gold ? 1 : 0;
  return {static_cast<double>(mismatches) / static_cast<double>(batch.instances.size()), RewardMode::kGold,
          batch.instances.size()};
}

/// 1 - f_mode / P_w, f_mode being the multiplicity of the most frequent label.
inline LocalReward reward_mode(const PerturbationBatch& batch) {
  if (batch.instances.empty()) raise(ErrorKind::kAllDiscarded, "empty perturbation batch");
  std::map<std::string_view, std::size_t> counts;
  std::size_t f_mode = 0;
  for (const auto& inst : batch.instances) f_mode = std::max(f_mode, ++counts[inst.label]);
  const auto p = static_cast<double>(batch.instances.size());
  return {1.0 - static_cast<double>(f_mode) / p, RewardMode::kModeFrequency, batch.instances.size()};
}

inline LocalReward local_reward(const PerturbationBatch& batch, RewardMode mode, const std::optional<std::string>& gold) {
  return mode == RewardMode::kGold ? reward_gold(batch, gold) : reward_mode(batch);
}

/// eps * r1 + (1 - eps) * r2 with eps in the open interval (0, 1).
inline double combine_convex(double r1, double r2, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) raise(ErrorKind::kDomain, "epsilon must lie in (0,1)");
  if (!(r1 >= 0.0 && r1 <= 1.0) || !(r2 >= 0.0 && r2 <= 1.0)) raise(ErrorKind::kDomain, "rewards must lie in [0,1]");
  return std::clamp(eps * r1 + (1.0 - eps) * r2, std::min(r1, r2), std::max(r1, r2));
}

}  // namespace smab
