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

// Downstream metrics over sensitivity reports and attack outcomes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "smab/corpus.hpp"
#include "smab/engine.hpp"
#include "smab/errors.hpp"
#include "smab/local_sensitivity.hpp"
#include "smab/oracle.hpp"
#include "smab/text.hpp"

namespace smab {

// ---------------------------------------------------------------------------
// Sensitivity histograms and divergence

struct SensitivityHistogram {
  std::vector<double> probs;  // one per uniform bin over [0,1]
  std::size_t word_count = 0;

  std::size_t bins() const { return probs.size(); }
};

/// Uniform bins over [0,1]; bin i covers [i/b, (i+1)/b) and the last bin
/// also takes 1.0.
inline std::size_t bin_of(double value, std::size_t bins) {
  const double v = std::clamp(value, 0.0, 1.0);
  return std::min(static_cast<std::size_t>(v * static_cast<double>(bins)), bins - 1);
}

inline SensitivityHistogram bin_values(std::span<const double> values, std::size_t bins) {
  if (bins < 2) raise(ErrorKind::kDomain, "need at least two bins");
  if (values.empty()) raise(ErrorKind::kDomain, "cannot bin an empty sensitivity set");
  SensitivityHistogram h{std::vector<double>(bins, 0.0), values.size()};
  for (double v : values) h.probs[bin_of(v, bins)] += 1.0;
  for (double& p : h.probs) p /= static_cast<double>(values.size());
  return h;
}

inline SensitivityHistogram bin_distribution(const SensitivityReport& report, std::size_t bins = 10) {
  std::vector<double> values;
  values.reserve(report.words.size());
  for (const auto& [w, s] : report.words) values.push_back(s.g);
  return bin_values(values, bins);
}

/// D_KL(P || Q) in nats. Every bin gets `smoothing` added before
/// renormalizing so empty bins stay finite.
inline double kl_divergence(const SensitivityHistogram& p, const SensitivityHistogram& q, double smoothing = 1e-9) {
  if (p.bins() != q.bins()) {
    raise(ErrorKind::kBinMismatch, std::to_string(p.bins()) + " vs " + std::to_string(q.bins()) + " bins");
  }
  if (!(smoothing > 0.0)) raise(ErrorKind::kDomain, "smoothing must be positive");
  const auto mass = [&](const SensitivityHistogram& h) {
    return std::accumulate(h.probs.begin(), h.probs.end(), 0.0) + smoothing * static_cast<double>(h.bins());
  };
  const double zp = mass(p), zq = mass(q);
  double d = 0.0;
  for (std::size_t i = 0; i < p.bins(); ++i) {
    const double pi = (p.probs[i] + smoothing) / zp;
    const double qi = (q.probs[i] + smoothing) / zq;
    d += pi * std::log(pi / qi);
  }
  return std::max(d, 0.0);
}

// ---------------------------------------------------------------------------
// Correlation

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;  // two-sided, Student t with n - 2 degrees of freedom
  std::size_t n = 0;
};

inline PearsonResult pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) raise(ErrorKind::kDomain, "pearson needs equal-length inputs");
  if (xs.size() < 3) raise(ErrorKind::kDomain, "pearson needs at least 3 points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) raise(ErrorKind::kDegenerateInput, "zero variance");
  PearsonResult res;
  res.n = xs.size();
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = n - 2.0;
  if (std::abs(res.r) >= 1.0) {
    res.p_value = 0.0;
  } else {
    const double t = res.r * std::sqrt(df / (1.0 - res.r * res.r));
    const boost::math::students_t dist(df);
    res.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
  }
  return res;
}

// ---------------------------------------------------------------------------
// SASR

struct SasrResult {
  double threshold = 0.0;
  std::optional<double> sasr;  // absent when no word is eligible
  std::size_t eligible = 0;
  std::size_t successes = 0;
  std::vector<std::string> flipped_words;
};

/// Fraction of words with G >= threshold that occur in `test_docs` and for
/// which some replacement at some occurrence changes the predicted label.
inline SasrResult sasr(const SensitivityReport& report, double threshold, const std::vector<Document>& test_docs,
                       const PreprocessConfig& cfg, Perturber& perturber, Classifier& classifier, std::size_t n_repl) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) raise(ErrorKind::kDomain, "threshold must lie in [0,1]");
  std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> occurrences;
  std::vector<std::vector<Token>> tokens;
  tokens.reserve(test_docs.size());
  for (std::size_t d = 0; d < test_docs.size(); ++d) {
    tokens.push_back(preprocess(test_docs[d].text, cfg));
    for (std::size_t p = 0; p < tokens[d].size(); ++p) occurrences[tokens[d][p].word].emplace_back(d, p);
  }
  SasrResult res;
  res.threshold = threshold;
  for (const auto& [word, s] : report.words) {
    if (s.g < threshold) continue;
    auto it = occurrences.find(word);
    if (it == occurrences.end()) continue;
    ++res.eligible;
    bool flipped = false;
    for (const auto& [d, p] : it->second) {
      auto batch = try_perturb(word, test_docs[d], tokens[d][p], n_repl, perturber, classifier, cfg.lowercase);
      if (!batch) continue;
      flipped = std::any_of(batch->instances.begin(), batch->instances.end(),
                            [&](const PerturbedInstance& inst) { return inst.label != batch->original_label; });
      if (flipped) break;
    }
    if (flipped) {
      ++res.successes;
      res.flipped_words.push_back(word);
    }
  }
  if (res.eligible > 0) res.sasr = static_cast<double>(res.successes) / static_cast<double>(res.eligible);
  return res;
}

/// Thresholds from `start` to `stop` inclusive in steps of `step`.
inline std::vector<double> threshold_grid(double start, double stop, double step) {
  if (!(step > 0.0) || stop < start) raise(ErrorKind::kDomain, "bad threshold range");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(std::min(start + static_cast<double>(i) * step, 1.0));
  return out;
}

inline std::string sasr_csv(const std::vector<SasrResult>& rows) {
  std::ostringstream out;
  out << "threshold,sasr,eligible_count\n";
  for (const auto& r : rows) {
    out << text::format_double(r.threshold) << ',' << (r.sasr ? text::format_double(*r.sasr) : std::string()) << ','
        << r.eligible << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Attack outcomes

struct AttackRecord {
  std::string x;
  std::string x_adv;
  std::string y;      // gold label
  std::string f_x;    // prediction on x
  std::string f_adv;  // prediction on x_adv
};

struct AttackOutcome {
  bool correct_original = false;  // f(x) == y
  bool success = false;           // f(x) == y and f(A(x)) != y
  bool robust = false;            // f(A(x)) == f(x) == y
};

inline AttackOutcome attack_outcome(const AttackRecord& r) {
  const bool correct = r.f_x == r.y;
  return {correct, correct && r.f_adv != r.y, correct && r.f_adv == r.f_x};
}

inline double asr(std::span<const AttackRecord> records) {
  if (records.empty()) raise(ErrorKind::kDomain, "no attack records");
  std::size_t correct = 0, success = 0;
  for (const auto& r : records) {
    const auto o = attack_outcome(r);
    correct += o.correct_original;
    success += o.success;
  }
  if (correct == 0) raise(ErrorKind::kNoCorrectOriginals, "no original is classified correctly");
  return static_cast<double>(success) / static_cast<double>(correct);
}

inline double after_attack_accuracy(std::span<const AttackRecord> records) {
  if (records.empty()) raise(ErrorKind::kDomain, "no attack records");
  std::size_t robust = 0;
  for (const auto& r : records) robust += attack_outcome(r).robust;
  return static_cast<double>(robust) / static_cast<double>(records.size());
}

/// Token-level edit distance between `x` and `x_adv`, divided by the token
/// count of `x`.
inline double word_modification_ratio(std::string_view x, std::string_view x_adv) {
  std::vector<std::string> a, b;
  for (auto& t : text::tokenize(x)) a.push_back(std::move(t.text));
  for (auto& t : text::tokenize(x_adv)) b.push_back(std::move(t.text));
  if (a.empty()) raise(ErrorKind::kDomain, "original text has no tokens");
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[b.size()]) / static_cast<double>(a.size());
}

inline std::vector<AttackRecord> parse_attack_records(std::string_view data) {
  std::vector<AttackRecord> out;
  std::istringstream in{std::string(data)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) raise(ErrorKind::kParse, "line " + std::to_string(line_no) + ": invalid JSON");
    try {
      out.push_back({j.at("x").get<std::string>(), j.at("x_adv").get<std::string>(), j.at("y").get<std::string>(),
                     j.at("f_x").get<std::string>(), j.at("f_adv").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace smab
