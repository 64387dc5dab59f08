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

// Corpus ingestion, preprocessing and the word -> occurrence index that
// defines the outer arms (words) and inner arms (documents containing them).

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smab/errors.hpp"
#include "smab/text.hpp"

namespace smab {

struct Document {
  std::string id;
  std::string text;
  std::optional<std::string> gold_label;

  friend bool operator==(const Document&, const Document&) = default;
};

enum class CorpusFormat { kJsonl, kCsv };

inline CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::kJsonl;
  if (name == "csv") return CorpusFormat::kCsv;
  raise(ErrorKind::kConfig, "unknown corpus format '" + std::string(name) + "'");
}

/// Guesses the format from the file extension; defaults to jsonl.
inline CorpusFormat corpus_format_for_path(std::string_view path) {
  return path.ends_with(".csv") ? CorpusFormat::kCsv : CorpusFormat::kJsonl;
}

namespace detail {

inline std::string ordinal_id(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", n);
  return buf;
}

inline std::string scalar_to_string(const nlohmann::json& v, std::string_view field, std::size_t line) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  raise(ErrorKind::kParse, "line " + std::to_string(line) + ": field '" + std::string(field) +
                               "' must be a string");
}

class CorpusBuilder {
 public:
  void add(std::optional<std::string> id, std::string text, std::optional<std::string> label,
           std::size_t line) {
    if (text::trim(text).empty()) {
      raise(ErrorKind::kEmptyText, "line " + std::to_string(line) + ": text is empty");
    }
    Pending p{std::move(id), std::move(text), std::move(label), line};
    if (p.id) claim(*p.id, line);
    pending_.push_back(std::move(p));
  }

  std::vector<Document> finish() {
    std::vector<Document> docs;
    docs.reserve(pending_.size());
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      Pending& p = pending_[i];
      if (!p.id) {
        p.id = ordinal_id(i);
        claim(*p.id, p.line);
      }
      docs.push_back({std::move(*p.id), std::move(p.text), std::move(p.label)});
    }
    return docs;
  }

 private:
  struct Pending {
    std::optional<std::string> id;
    std::string text;
    std::optional<std::string> label;
    std::size_t line;
  };

  void claim(const std::string& id, std::size_t line) {
    if (!seen_.insert(id).second) {
      raise(ErrorKind::kDuplicateId, "\"" + id + "\" at line " + std::to_string(line));
    }
  }

  std::vector<Pending> pending_;
  std::unordered_set<std::string> seen_;
};

// RFC 4180 record reader. Returns false at end of input; `line` is the
// 1-based line on which the record starts.
inline bool read_csv_record(std::string_view data, std::size_t& pos, std::size_t& line_counter,
                            std::vector<std::string>& fields, std::size_t& record_line) {
  fields.clear();
  if (pos >= data.size()) return false;
  record_line = line_counter;
  std::string field;
  bool quoted = false;
  while (pos < data.size()) {
    const char c = data[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < data.size() && data[pos + 1] == '"') {
          field += '"';
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      if (c == '\n') ++line_counter;
      field += c;
      ++pos;
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      ++pos;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      ++pos;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && pos + 1 < data.size() && data[pos + 1] == '\n') ++pos;
      ++pos;
      ++line_counter;
      fields.push_back(std::move(field));
      return true;
    } else {
      field += c;
      ++pos;
    }
  }
  if (quoted) {
    raise(ErrorKind::kParse, "line " + std::to_string(record_line) + ": unterminated quoted field");
  }
  fields.push_back(std::move(field));
  return true;
}

}  // namespace detail

/// Parses a corpus held in memory. JSONL records need `text` and may carry
/// `id` and `label`; CSV needs a header row with a `text` column.
inline std::vector<Document> parse_corpus(std::string_view data, CorpusFormat format) {
  detail::CorpusBuilder builder;
  if (format == CorpusFormat::kJsonl) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= data.size()) {
      std::size_t nl = data.find('\n', pos);
      if (nl == std::string_view::npos) nl = data.size();
      std::string_view line = data.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      if (text::trim(line).empty()) {
        if (nl == data.size()) break;
        continue;
      }
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        raise(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what());
      }
      if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string()) {
        raise(ErrorKind::kParse, "line " + std::to_string(line_no) + ": record needs a string 'text'");
      }
      std::optional<std::string> id, label;
      if (rec.contains("id") && !rec["id"].is_null()) id = detail::scalar_to_string(rec["id"], "id", line_no);
      if (rec.contains("label") && !rec["label"].is_null()) {
        label = detail::scalar_to_string(rec["label"], "label", line_no);
      }
      builder.add(std::move(id), rec["text"].get<std::string>(), std::move(label), line_no);
      if (nl == data.size()) break;
    }
    return builder.finish();
  }

  std::size_t pos = 0, line_counter = 1, record_line = 1;
  std::vector<std::string> fields;
  if (!detail::read_csv_record(data, pos, line_counter, fields, record_line)) {
    raise(ErrorKind::kParse, "line 1: missing CSV header");
  }
  std::optional<std::size_t> text_col, id_col, label_col;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const std::string name(text::trim(fields[i]));
    if (name == "text") text_col = i;
    else if (name == "id") id_col = i;
    else if (name == "label") label_col = i;
  }
  if (!text_col) raise(ErrorKind::kParse, "line 1: CSV header has no 'text' column");
  const std::size_t ncols = fields.size();
  while (detail::read_csv_record(data, pos, line_counter, fields, record_line)) {
    if (fields.size() == 1 && text::trim(fields[0]).empty()) continue;
    if (fields.size() != ncols) {
      raise(ErrorKind::kParse, "line " + std::to_string(record_line) + ": expected " +
                                   std::to_string(ncols) + " fields, got " + std::to_string(fields.size()));
    }
    std::optional<std::string> id, label;
    if (id_col && !fields[*id_col].empty()) id = fields[*id_col];
    if (label_col && !fields[*label_col].empty()) label = fields[*label_col];
    builder.add(std::move(id), fields[*text_col], std::move(label), record_line);
  }
  return builder.finish();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::kIo, "cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) raise(ErrorKind::kIo, "short write to '" + path + "'");
}

inline std::vector<Document> load_corpus(const std::string& path, CorpusFormat format) {
  return parse_corpus(read_file(path), format);
}

// ---------------------------------------------------------------------------
// Preprocessing

/// A compact English stopword list (articles, pronouns, auxiliaries,
/// prepositions, conjunctions).
inline const std::set<std::string>& builtin_stopwords() {
  static const std::set<std::string> kWords = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
      "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
      "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
      "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
      "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
      "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
      "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "s", "same", "she",
      "should", "so", "some", "such", "t", "than", "that", "the", "their", "theirs", "them",
      "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
      "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
      "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
      "yourselves"};
  return kWords;
}

struct PreprocessConfig {
  bool lowercase = true;
  bool strip_urls = true;
  std::set<std::string> stopwords;
  /// word -> lemma; empty disables lemmatization.
  std::map<std::string, std::string> lemmas;
  std::size_t min_freq = 1;
  std::optional<std::size_t> max_arms;

  std::string normalize(std::string_view word) const {
    return lowercase ? text::to_lower(word) : std::string(word);
  }
};

/// One line per word; blank lines and '#' comments are ignored.
inline std::set<std::string> load_stopwords(const std::string& path) {
  std::set<std::string> out;
  std::istringstream in(read_file(path));
  for (std::string line; std::getline(in, line);) {
    const auto w = text::trim(line);
    if (!w.empty() && w.front() != '#') out.emplace(w);
  }
  return out;
}

/// TSV `word<TAB>lemma` table.
inline std::map<std::string, std::string> load_lemma_table(const std::string& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_file(path));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      raise(ErrorKind::kParse, path + " line " + std::to_string(line_no) + ": expected word<TAB>lemma");
    }
    out[std::string(text::trim(std::string_view(line).substr(0, tab)))] =
        std::string(text::trim(std::string_view(line).substr(tab + 1)));
  }
  return out;
}

struct Token {
  std::string word;     // normalized form used as the arm key
  std::string surface;  // original bytes
  text::Span span;

  friend bool operator==(const Token&, const Token&) = default;
};

inline std::vector<Token> preprocess(std::string_view input, const PreprocessConfig& cfg) {
  std::vector<Token> out;
  for (text::RawToken& raw : text::tokenize(input, cfg.strip_urls)) {
    std::string word = cfg.normalize(raw.text);
    if (cfg.stopwords.contains(word)) continue;
    if (!cfg.lemmas.empty()) {
      if (auto it = cfg.lemmas.find(word); it != cfg.lemmas.end()) word = it->second;
      if (word.empty() || cfg.stopwords.contains(word)) continue;
    }
    out.push_back({std::move(word), std::move(raw.text), raw.span});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Arm index

struct Posting {
  std::size_t doc = 0;       // index into the document list
  std::size_t position = 0;  // index into preprocess(doc.text)

  friend auto operator<=>(const Posting&, const Posting&) = default;
};

struct IndexStats {
  std::size_t arms = 0;
  std::size_t edges = 0;
  std::size_t documents = 0;

  friend bool operator==(const IndexStats&, const IndexStats&) = default;
};

/// Immutable once built; safe for concurrent reads.
struct ArmIndex {
  std::vector<std::string> words;                      // sorted
  std::map<std::string, std::vector<Posting>> postings;
  IndexStats stats;

  const std::vector<Posting>& postings_for(const std::string& word) const { return postings.at(word); }

  friend bool operator==(const ArmIndex&, const ArmIndex&) = default;
};

inline ArmIndex build_arm_index(const std::vector<Document>& docs, const PreprocessConfig& cfg) {
  if (docs.empty()) raise(ErrorKind::kEmptyIndex, "no documents");
  std::map<std::string, std::vector<Posting>> all;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto tokens = preprocess(docs[d].text, cfg);
    for (std::size_t p = 0; p < tokens.size(); ++p) all[tokens[p].word].push_back({d, p});
  }
  std::erase_if(all, [&](const auto& kv) { return kv.second.size() < std::max<std::size_t>(cfg.min_freq, 1); });
  if (cfg.max_arms && all.size() > *cfg.max_arms) {
    std::vector<std::pair<std::size_t, std::string>> ranked;
    ranked.reserve(all.size());
    for (const auto& [w, p] : all) ranked.emplace_back(p.size(), w);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::set<std::string> keep;
    for (std::size_t i = 0; i < *cfg.max_arms; ++i) keep.insert(ranked[i].second);
    std::erase_if(all, [&](const auto& kv) { return !keep.contains(kv.first); });
  }
  if (all.empty()) raise(ErrorKind::kEmptyIndex, "no token survives preprocessing");

  ArmIndex index;
  index.stats.documents = docs.size();
  for (auto& [w, p] : all) {
    index.words.push_back(w);
    index.stats.edges += p.size();
  }
  index.stats.arms = index.words.size();
  index.postings = std::move(all);
  return index;
}

inline nlohmann::json to_json(const ArmIndex& index) {
  nlohmann::json postings = nlohmann::json::object();
  for (const auto& [w, list] : index.postings) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Posting& p : list) arr.push_back({p.doc, p.position});
    postings[w] = std::move(arr);
  }
  return {{"words", index.words},
          {"postings", std::move(postings)},
          {"stats",
           {{"arms", index.stats.arms}, {"edges", index.stats.edges}, {"documents", index.stats.documents}}}};
}

inline ArmIndex arm_index_from_json(const nlohmann::json& j) {
  try {
    ArmIndex index;
    index.words = j.at("words").get<std::vector<std::string>>();
    for (const auto& [w, arr] : j.at("postings").items()) {
      auto& list = index.postings[w];
      for (const auto& pair : arr) list.push_back({pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>()});
    }
    const auto& s = j.at("stats");
    index.stats = {s.at("arms").get<std::size_t>(), s.at("edges").get<std::size_t>(),
                   s.at("documents").get<std::size_t>()};
    std::size_t edges = 0;
    for (const auto& w : index.words) {
      auto it = index.postings.find(w);
      if (it == index.postings.end() || it->second.empty()) {
        raise(ErrorKind::kParse, "index word '" + w + "' has no postings");
      }
      edges += it->second.size();
    }
    if (index.postings.size() != index.words.size() || edges != index.stats.edges ||
        index.words.size() != index.stats.arms) {
      raise(ErrorKind::kParse, "index stats are inconsistent with its postings");
    }
    return index;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kParse, std::string("malformed index: ") + e.what());
  }
}

/// Checks that every posting points at a real occurrence of its word.
inline void validate_index(const ArmIndex& index, const std::vector<Document>& docs, const PreprocessConfig& cfg) {
  if (index.stats.documents != docs.size()) {
    raise(ErrorKind::kConfig, "index was built from " + std::to_string(index.stats.documents) +
                                  " documents but the corpus has " + std::to_string(docs.size()));
  }
  std::unordered_map<std::size_t, std::vector<Token>> tokens;
  for (const auto& [w, list] : index.postings) {
    for (const Posting& p : list) {
      if (p.doc >= docs.size()) raise(ErrorKind::kConfig, "posting for '" + w + "' references a missing document");
      auto it = tokens.find(p.doc);
      if (it == tokens.end()) it = tokens.emplace(p.doc, preprocess(docs[p.doc].text, cfg)).first;
      if (p.position >= it->second.size() || it->second[p.position].word != w) {
        raise(ErrorKind::kConfig, "posting for '" + w + "' does not match document " + docs[p.doc].id);
      }
    }
  }
}

}  // namespace smab
