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

// Sensitivity-guided attack utilities: perturbation instructions seeded with
// a text's most sensitive words, keyphrase-based text sensitivity, and the
// sensitivity reward term for paraphrase attacks.

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smab/corpus.hpp"
#include "smab/engine.hpp"
#include "smab/errors.hpp"
#include "smab/oracle.hpp"
#include "smab/text.hpp"

namespace smab {

struct ScoredWord {
  std::string word;
  double g = 0.0;

  friend bool operator==(const ScoredWord&, const ScoredWord&) = default;
};

/// The `k` distinct indexed words of `input` with the highest global
/// sensitivity, descending; ties go to the lexicographically smaller word.
inline std::vector<ScoredWord> top_sensitive_words(const SensitivityReport& report, std::string_view input,
                                                   std::size_t k, const PreprocessConfig& cfg) {
  if (k == 0) raise(ErrorKind::kDomain, "k must be at least 1");
  std::set<std::string> seen;
  std::vector<ScoredWord> found;
  for (const Token& t : preprocess(input, cfg)) {
    if (!seen.insert(t.word).second) continue;
    if (auto it = report.words.find(t.word); it != report.words.end()) found.push_back({t.word, it->second.g});
  }
  if (found.empty()) raise(ErrorKind::kNoIndexedWords, "text contains no indexed word");
  std::sort(found.begin(), found.end(), [](const ScoredWord& a, const ScoredWord& b) {
    return a.g != b.g ? a.g > b.g : a.word < b.word;
  });
  if (found.size() > k) found.resize(k);
  return found;
}

// ---------------------------------------------------------------------------
// Perturbation instructions

struct InstructionTemplate {
  std::string_view id;
  std::string_view text;
  std::size_t words_needed;  // 0 for the word-free baselines
};

inline constexpr std::array<InstructionTemplate, 6> kInstructionTemplates{{
    {"W1", "Replace at most two words in the sentence with synonyms.", 0},
    {"W2",
     "Choose at most two words in the sentence that do not contribute to the meaning of the sentence and delete "
     "them.",
     0},
    {"W3", "Add at most two semantically neutral words to the sentence.", 0},
    {"W4",
     "For a given sentence, there always exists a minimal subset of words that need to be replaced to flip the "
     "label of the sentence while preserving its semantic meaning. Global Sensitivity of a word provides a greedy "
     "heuristic to discover such a minimal subset. The higher the global sensitivity, the higher the chance that "
     "the word belongs to the minimal subset. Given the minimal subset of the words [\"[Word1]\", \"[Word2]\"] and "
     "their global sensitivity values in the decreasing order [GS1, GS2], replace these words in the original "
     "sentence with semantically close words.",
     2},
    {"W5",
     "The words \"[Word1]\" and \"[Word2]\" are highly sensitive in the given sentence, and perturbing either "
     "\"[Word1]\", \"[Word2]\", or both can change the label of the sentence while preserving the semantic meaning "
     "of the new sentence as that of the original.",
     2},
    {"W6",
     "Add at most two semantically close words to the sentence, replacing the words \"[Word1]\" or \"[Word2]\", or "
     "both.",
     2},
}};

inline const InstructionTemplate& find_template(std::string_view id) {
  for (const auto& t : kInstructionTemplates) {
    if (t.id == id) return t;
  }
  raise(ErrorKind::kUnknownTemplate, "'" + std::string(id) + "'");
}

namespace detail {

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace detail

/// Substitutes [Word1]/[Word2] and GS1/GS2 with the first two entries of
/// `words` (the top word is repeated when only one is available).
inline std::string render_instruction(std::string_view template_id, const std::vector<ScoredWord>& words) {
  const InstructionTemplate& tpl = find_template(template_id);
  std::string out(tpl.text);
  if (tpl.words_needed == 0) return out;
  if (words.empty()) raise(ErrorKind::kNoIndexedWords, std::string(template_id) + " needs at least one word");
  const ScoredWord& first = words[0];
  const ScoredWord& second = words.size() > 1 ? words[1] : words[0];
  detail::replace_all(out, "GS1", text::format_double(first.g));
  detail::replace_all(out, "GS2", text::format_double(second.g));
  detail::replace_all(out, "[Word1]", first.word);
  detail::replace_all(out, "[Word2]", second.word);
  return out;
}

// ---------------------------------------------------------------------------
// Keyphrase sensitivity

struct KeyphraseSet {
  std::vector<std::vector<std::string>> phrases;

  std::size_t total_words() const {
    std::size_t n = 0;
    for (const auto& p : phrases) n += p.size();
    return n;
  }
};

/// Accepts [["w", ...], ...] or ["multi word phrase", ...].
inline KeyphraseSet keyphrases_from_json(const nlohmann::json& j) {
  if (!j.is_array()) raise(ErrorKind::kParse, "keyphrases must be a JSON array");
  KeyphraseSet set;
  for (const auto& item : j) {
    std::vector<std::string> words;
    if (item.is_string()) {
      for (auto& t : text::split_whitespace(item.get<std::string>())) words.push_back(std::move(t.text));
    } else if (item.is_array()) {
      for (const auto& w : item) {
        if (!w.is_string()) raise(ErrorKind::kParse, "keyphrase words must be strings");
        words.push_back(w.get<std::string>());
      }
    } else {
      raise(ErrorKind::kParse, "keyphrase must be a string or a list of words");
    }
    if (!words.empty()) set.phrases.push_back(std::move(words));
  }
  return set;
}

struct MaskedText {
  std::string text;                     // with one kMaskToken per masked word
  std::vector<std::string> originals;   // masked surfaces, left to right
  std::vector<std::string> segments;    // text between masks; size = originals + 1

  std::string assemble(const std::vector<std::string>& fills) const {
    std::string out = segments[0];
    for (std::size_t i = 0; i < fills.size(); ++i) {
      out += fills[i];
      out += segments[i + 1];
    }
    return out;
  }
};

/// Masks the first not-yet-masked occurrence (case-insensitive) of each
/// keyphrase word. Words absent from the text are left alone.
inline MaskedText mask_keyphrase(std::string_view input, const std::vector<std::string>& phrase) {
  const auto tokens = text::tokenize(input);
  std::vector<bool> used(tokens.size(), false);
  std::vector<std::size_t> picked;
  for (const auto& w : phrase) {
    const std::string target = text::to_lower(w);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!used[i] && text::to_lower(tokens[i].text) == target) {
        used[i] = true;
        picked.push_back(i);
        break;
      }
    }
  }
  std::sort(picked.begin(), picked.end());
  MaskedText m;
  std::size_t pos = 0;
  for (std::size_t i : picked) {
    m.segments.emplace_back(input.substr(pos, tokens[i].span.begin - pos));
    m.originals.push_back(tokens[i].text);
    pos = tokens[i].span.end;
  }
  m.segments.emplace_back(input.substr(pos));
  m.text = m.assemble(std::vector<std::string>(m.originals.size(), std::string(kMaskToken)));
  return m;
}

/// Up to `count` perturbations of a masked text. Uses the perturber's joint
/// fill when available; otherwise fills masks left to right, one fill-mask
/// query per mask with the remaining masks showing their original words,
/// and the i-th perturbation takes the i-th candidate of each query.
inline std::vector<std::string> fill_masks(const MaskedText& masked, Perturber& perturber, std::size_t count) {
  if (masked.originals.empty()) return {};
  if (auto joint = perturber.fill_joint(masked.text, masked.originals, count)) {
    if (joint->size() > count) joint->resize(count);
    return *std::move(joint);
  }
  std::map<std::string, std::vector<Candidate>> memo;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::string> fills = masked.originals;
    bool complete = true;
    for (std::size_t j = 0; j < fills.size() && complete; ++j) {
      std::vector<std::string> probe = fills;
      probe[j] = std::string(kMaskToken);
      const std::string query = masked.assemble(probe);
      auto it = memo.find(query);
      if (it == memo.end()) it = memo.emplace(query, fill_mask(perturber, {query, count, masked.originals[j]})).first;
      if (it->second.size() <= i) {
        complete = false;
      } else {
        fills[j] = it->second[i].token;
      }
    }
    if (complete) out.push_back(masked.assemble(fills));
  }
  return out;
}

/// Per keyphrase: mask its words jointly, generate `n_repl` perturbations and
/// take the fraction whose predicted label differs from the original's.
/// The text sensitivity is the sum of those fractions over the total number
/// of keyphrase words (0 when there are none).
inline double text_sensitivity(const std::string& input, const KeyphraseSet& keyphrases, Perturber& perturber,
                               Classifier& classifier, std::size_t n_repl = 10) {
  const std::size_t total_words = keyphrases.total_words();
  if (total_words == 0) return 0.0;
  if (n_repl == 0) raise(ErrorKind::kDomain, "n_repl must be at least 1");
  const std::string original_label = classify(classifier, std::vector<std::string>{input}).at(0);
  double sum = 0.0;
  for (const auto& phrase : keyphrases.phrases) {
    const std::vector<std::string> perturbed = fill_masks(mask_keyphrase(input, phrase), perturber, n_repl);
    if (perturbed.empty()) continue;
    const auto labels = classify(classifier, perturbed);
    const auto flips = std::count_if(labels.begin(), labels.end(), [&](const std::string& l) { return l != original_label; });
    sum += static_cast<double>(flips) / static_cast<double>(labels.size());
  }
  return sum / static_cast<double>(total_words);
}

/// alpha * (s(x) - s(x_adv)), the sensitivity term added to a paraphrase
/// attack's reward.
inline double sensitivity_reward(double s_x, double s_x_adv, double alpha = 0.25) {
  if (!(alpha > 0.0 && alpha < 1.0)) raise(ErrorKind::kDomain, "alpha must lie in (0,1)");
  return alpha * (s_x - s_x_adv);
}

}  // namespace smab
