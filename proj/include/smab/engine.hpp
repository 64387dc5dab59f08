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

// The two-layer bandit loop. Each step selects a word (outer arm), draws
// document occurrences of it (inner arms) uniformly with replacement,
// estimates a local sensitivity and folds it into the word's global
// sensitivity.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smab/bandit.hpp"
#include "smab/corpus.hpp"
#include "smab/errors.hpp"
#include "smab/hash.hpp"
#include "smab/local_sensitivity.hpp"
#include "smab/oracle.hpp"
#include "smab/random.hpp"

namespace smab {

enum class Strategy { kUcb1, kThompson };
enum class Combine { kSingle, kConvex };
enum class LStarMode { kRunningMax, kExhaustive };

inline Strategy parse_strategy(std::string_view s) {
  if (s == "ucb1" || s == "ucb") return Strategy::kUcb1;
  if (s == "thompson" || s == "ts") return Strategy::kThompson;
  raise(ErrorKind::kConfig, "unknown strategy '" + std::string(s) + "'");
}
inline std::string_view to_string(Strategy s) { return s == Strategy::kUcb1 ? "ucb1" : "thompson"; }

inline Combine parse_combine(std::string_view s) {
  if (s == "single") return Combine::kSingle;
  if (s == "convex") return Combine::kConvex;
  raise(ErrorKind::kConfig, "unknown combine mode '" + std::string(s) + "'");
}
inline std::string_view to_string(Combine c) { return c == Combine::kSingle ? "single" : "convex"; }

inline LStarMode parse_l_star_mode(std::string_view s) {
  if (s == "running_max") return LStarMode::kRunningMax;
  if (s == "exhaustive") return LStarMode::kExhaustive;
  raise(ErrorKind::kConfig, "unknown l_star mode '" + std::string(s) + "'");
}
inline std::string_view to_string(LStarMode m) { return m == LStarMode::kRunningMax ? "running_max" : "exhaustive"; }

struct RunConfig {
  std::uint64_t iterations = 200000;
  Strategy strategy = Strategy::kThompson;
  RewardMode reward_mode = RewardMode::kModeFrequency;
  Combine combine = Combine::kConvex;
  double epsilon = 0.9;
  std::size_t n_repl = 10;
  InitScheme init_scheme = InitScheme::kBeta;
  InitParams init;
  bool binarize_reward = false;
  /// Occurrences probed per convex step (the random pick included); 0 probes
  /// every occurrence of the word.
  std::size_t inner_probe = 2;
  LStarMode l_star_mode = LStarMode::kRunningMax;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 0;
  std::string checkpoint_path;
  std::size_t regret_points = 10000;
  bool record_timing = false;

  void validate() const {
    if (iterations < 1) raise(ErrorKind::kConfig, "iterations must be at least 1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) raise(ErrorKind::kConfig, "epsilon must lie in (0,1)");
    if (n_repl < 1) raise(ErrorKind::kConfig, "n_repl must be at least 1");
    if (regret_points < 2) raise(ErrorKind::kConfig, "regret_points must be at least 2");
  }

  /// Settings that determine the trajectory; iteration count and
  /// checkpoint plumbing are excluded so a run can be resumed and extended.
  nlohmann::json trajectory_json() const {
    return {{"strategy", to_string(strategy)},
            {"reward_mode", to_string(reward_mode)},
            {"combine", to_string(combine)},
            {"epsilon", epsilon},
            {"n_repl", n_repl},
            {"init_scheme", to_string(init_scheme)},
            {"init",
             {{"mean", init.mean},
              {"sd", init.sd},
              {"low", init.low},
              {"high", init.high},
              {"alpha_low", init.alpha_low},
              {"alpha_high", init.alpha_high}}},
            {"binarize_reward", binarize_reward},
            {"inner_probe", inner_probe},
            {"l_star_mode", to_string(l_star_mode)},
            {"seed", seed}};
  }

  nlohmann::json to_json() const {
    nlohmann::json j = trajectory_json();
    j["iterations"] = iterations;
    return j;
  }

  std::string fingerprint() const { return sha256_hex(trajectory_json().dump()); }
};

struct WordSensitivity {
  double g = 0.0;
  std::uint64_t n = 0;
  double l_star = 0.0;
  bool retired = false;  // no occurrence admits a valid perturbation

  friend bool operator==(const WordSensitivity&, const WordSensitivity&) = default;
};

struct RunCounters {
  std::uint64_t steps = 0;
  std::uint64_t updates = 0;
  std::uint64_t skipped = 0;
  OracleCounters oracle;

  friend bool operator==(const RunCounters&, const RunCounters&) = default;
};

struct SensitivityReport {
  nlohmann::json config = nlohmann::json::object();
  std::string config_fingerprint;
  std::string classifier_fingerprint;
  std::string perturber_fingerprint;
  std::map<std::string, WordSensitivity> words;
  std::vector<std::pair<std::uint64_t, double>> regret;  // (update index, cumulative regret)
  RunCounters counters;
  std::optional<double> wall_clock_ms;

  double g(const std::string& word) const { return words.at(word).g; }
};

inline nlohmann::json to_json(const SensitivityReport& r) {
  nlohmann::json words = nlohmann::json::object();
  for (const auto& [w, s] : r.words) {
    words[w] = {{"g", s.g}, {"n", s.n}, {"l_star", s.l_star}};
    if (s.retired) words[w]["retired"] = true;
  }
  nlohmann::json regret = nlohmann::json::array();
  for (const auto& [k, v] : r.regret) regret.push_back({k, v});
  nlohmann::json counters{{"steps", r.counters.steps},
                          {"updates", r.counters.updates},
                          {"skipped", r.counters.skipped},
                          {"fill_mask_calls", r.counters.oracle.fill_mask_calls},
                          {"classify_calls", r.counters.oracle.classify_calls},
                          {"classify_texts", r.counters.oracle.classify_texts}};
  if (r.wall_clock_ms) counters["wall_clock_ms"] = *r.wall_clock_ms;
  return {{"config", r.config},
          {"config_fingerprint", r.config_fingerprint},
          {"oracles", {{"classifier", r.classifier_fingerprint}, {"perturber", r.perturber_fingerprint}}},
          {"words", std::move(words)},
          {"regret", std::move(regret)},
          {"counters", std::move(counters)}};
}

inline SensitivityReport sensitivity_report_from_json(const nlohmann::json& j) {
  try {
    SensitivityReport r;
    r.config = j.value("config", nlohmann::json::object());
    r.config_fingerprint = j.value("config_fingerprint", std::string());
    if (j.contains("oracles")) {
      r.classifier_fingerprint = j["oracles"].value("classifier", std::string());
      r.perturber_fingerprint = j["oracles"].value("perturber", std::string());
    }
    for (const auto& [w, s] : j.at("words").items()) {
      r.words[w] = {s.at("g").get<double>(), s.value("n", std::uint64_t{0}), s.value("l_star", 0.0),
                    s.value("retired", false)};
    }
    if (j.contains("regret")) {
      for (const auto& p : j["regret"]) r.regret.emplace_back(p.at(0).get<std::uint64_t>(), p.at(1).get<double>());
    }
    if (j.contains("counters")) {
      const auto& c = j["counters"];
      r.counters.steps = c.value("steps", std::uint64_t{0});
      r.counters.updates = c.value("updates", std::uint64_t{0});
      r.counters.skipped = c.value("skipped", std::uint64_t{0});
      r.counters.oracle.fill_mask_calls = c.value("fill_mask_calls", std::uint64_t{0});
      r.counters.oracle.classify_calls = c.value("classify_calls", std::uint64_t{0});
      r.counters.oracle.classify_texts = c.value("classify_texts", std::uint64_t{0});
      if (c.contains("wall_clock_ms")) r.wall_clock_ms = c["wall_clock_ms"].get<double>();
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kParse, std::string("malformed report: ") + e.what());
  }
}

/// Evenly spaced samples of a cumulative trace, always keeping the endpoints.
inline std::vector<std::pair<std::uint64_t, double>> downsample(const std::vector<double>& trace, std::size_t max_points) {
  std::vector<std::pair<std::uint64_t, double>> out;
  const std::size_t n = trace.size();
  if (n == 0) return out;
  if (n <= max_points) {
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(i + 1, trace[i]);
    return out;
  }
  for (std::size_t i = 0; i < max_points; ++i) {
    const std::size_t idx = i * (n - 1) / (max_points - 1);
    out.emplace_back(idx + 1, trace[idx]);
  }
  return out;
}

inline constexpr int kCheckpointVersion = 1;

class Engine {
 public:
  Engine(const ArmIndex& index, const std::vector<Document>& docs, const PreprocessConfig& preprocess_cfg,
         RunConfig cfg, Classifier& classifier, Perturber& perturber)
      : index_(index),
        docs_(docs),
        lowercase_(preprocess_cfg.lowercase),
        cfg_(std::move(cfg)),
        classifier_(classifier),
        perturber_(perturber),
        rng_(cfg_.seed) {
    cfg_.validate();
    if (index_.words.empty()) raise(ErrorKind::kEmptyIndex, "index has no words");
    validate_index(index_, docs_, preprocess_cfg);
    tokens_.reserve(docs_.size());
    for (const auto& d : docs_) tokens_.push_back(preprocess(d.text, preprocess_cfg));
    if (cfg_.reward_mode == RewardMode::kGold) {
      for (const auto& d : docs_) {
        if (!d.gold_label) raise(ErrorKind::kMissingGold, "document " + d.id + " has no gold label");
      }
    }
    arms_ = init_arms(index_.words, cfg_.init_scheme, cfg_.init, rng_);
    retired_.assign(arms_.size(), false);
    if (cfg_.l_star_mode == LStarMode::kExhaustive) {
      for (auto& arm : arms_) arm.best_local = exhaustive_best_local(arm.word);
    }
  }

  const RunConfig& config() const { return cfg_; }
  const std::vector<ArmState>& arms() const { return arms_; }
  const RegretTrace& regret() const { return regret_; }
  const RunCounters& counters() const { return counters_; }
  std::uint64_t steps_done() const { return counters_.steps; }

  /// One iteration. Either fully commits or, if an oracle throws, leaves the
  /// engine exactly as it was.
  void step() {
    Rng rng = rng_;
    OracleCounters oc = counters_.oracle;

    const auto selected = select(rng);
    if (!selected) {
      ++counters_.steps;
      ++counters_.skipped;
      return;
    }
    const std::size_t arm_idx = *selected;
    const std::string& word = arms_[arm_idx].word;
    const auto& postings = index_.postings_for(word);

    const Posting first = postings[uniform_index(rng, postings.size())];
    const std::optional<double> r1 = probe(word, first, oc);
    std::optional<double> local;
    if (r1) {
      local = *r1;
      if (cfg_.combine == Combine::kConvex) {
        double r2 = *r1;
        if (cfg_.inner_probe == 0) {
          for (const Posting& p : postings) {
            if (auto r = probe(word, p, oc)) r2 = std::max(r2, *r);
          }
        } else {
          for (std::size_t k = 1; k < cfg_.inner_probe; ++k) {
            const Posting p = postings[uniform_index(rng, postings.size())];
            if (auto r = probe(word, p, oc)) r2 = std::max(r2, *r);
          }
        }
        local = combine_convex(*r1, r2, cfg_.epsilon);
      }
      if (cfg_.binarize_reward) local = *local > 0.0 ? 1.0 : 0.0;
    }

    // an arm whose every occurrence is discarded can never update; under
    // UCB1 it would otherwise be reselected forever
    bool retire = false;
    if (!local) {
      retire = true;
      for (const Posting& p : postings) {
        if (probe(word, p, oc)) {
          retire = false;
          break;
        }
      }
    }

    // commit
    rng_ = rng;
    counters_.oracle = oc;
    ++counters_.steps;
    if (!local) {
      ++counters_.skipped;
      if (retire) retired_[arm_idx] = true;
      return;
    }
    arms_[arm_idx] = update_global(arms_[arm_idx], *local);
    update_regret(regret_, arms_[arm_idx], *local);
    ++counters_.updates;
  }

  /// Steps until `total` iterations have completed, checkpointing as
  /// configured. On oracle failure the last consistent state is
  /// checkpointed before the error propagates.
  void run_until(std::uint64_t total) {
    const auto start = std::chrono::steady_clock::now();
    while (counters_.steps < total) {
      try {
        step();
      } catch (const Error& e) {
        if (is_oracle_error(e.kind()) && !cfg_.checkpoint_path.empty()) save_checkpoint(cfg_.checkpoint_path);
        throw;
      }
      if (cfg_.checkpoint_every > 0 && !cfg_.checkpoint_path.empty() && counters_.steps % cfg_.checkpoint_every == 0) {
        save_checkpoint(cfg_.checkpoint_path);
      }
    }
    elapsed_ms_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }

  void run() { run_until(cfg_.iterations); }

  nlohmann::json checkpoint_json() const {
    nlohmann::json arms = nlohmann::json::array();
    for (const auto& a : arms_) arms.push_back(to_json(a));
    return {{"schema", "smab-checkpoint"},
            {"version", kCheckpointVersion},
            {"config_fingerprint", cfg_.fingerprint()},
            {"steps", counters_.steps},
            {"updates", counters_.updates},
            {"skipped", counters_.skipped},
            {"oracle_counters",
             {{"fill_mask_calls", counters_.oracle.fill_mask_calls},
              {"classify_calls", counters_.oracle.classify_calls},
              {"classify_texts", counters_.oracle.classify_texts}}},
            {"rng", rng_state(rng_)},
            {"arms", std::move(arms)},
            {"retired", retired_words()},
            {"regret", regret_.cumulative}};
  }

  void restore(const nlohmann::json& j) {
    if (!j.is_object() || j.value("schema", std::string()) != "smab-checkpoint" ||
        j.value("version", -1) != kCheckpointVersion) {
      raise(ErrorKind::kVersionMismatch, "expected smab-checkpoint version " + std::to_string(kCheckpointVersion));
    }
    try {
      if (j.at("config_fingerprint").get<std::string>() != cfg_.fingerprint()) {
        raise(ErrorKind::kConfig, "checkpoint was written with a different run configuration");
      }
      std::vector<ArmState> arms;
      for (const auto& a : j.at("arms")) arms.push_back(arm_state_from_json(a));
      if (arms.size() != arms_.size()) raise(ErrorKind::kConfig, "checkpoint arm count does not match the index");
      for (std::size_t i = 0; i < arms.size(); ++i) {
        if (arms[i].word != arms_[i].word) raise(ErrorKind::kConfig, "checkpoint arms do not match the index");
      }
      RunCounters c;
      c.steps = j.at("steps").get<std::uint64_t>();
      c.updates = j.at("updates").get<std::uint64_t>();
      c.skipped = j.at("skipped").get<std::uint64_t>();
      const auto& oc = j.at("oracle_counters");
      c.oracle = {oc.at("fill_mask_calls").get<std::uint64_t>(), oc.at("classify_calls").get<std::uint64_t>(),
                  oc.at("classify_texts").get<std::uint64_t>()};
      RegretTrace regret{j.at("regret").get<std::vector<double>>()};
      Rng rng = rng_from_state(j.at("rng").get<std::string>());
      std::vector<bool> retired(arms.size(), false);
      for (const auto& w : j.at("retired")) {
        const auto it = std::find_if(arms.begin(), arms.end(), [&](const ArmState& a) { return a.word == w; });
        if (it == arms.end()) raise(ErrorKind::kConfig, "checkpoint retires an unknown arm");
        retired[static_cast<std::size_t>(it - arms.begin())] = true;
      }

      arms_ = std::move(arms);
      counters_ = c;
      regret_ = std::move(regret);
      rng_ = rng;
      retired_ = std::move(retired);
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorKind::kParse, std::string("malformed checkpoint: ") + e.what());
    }
  }

  void save_checkpoint(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    write_file(tmp, checkpoint_json().dump());
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) raise(ErrorKind::kIo, "cannot move checkpoint into place at " + path);
  }

  void load_checkpoint(const std::string& path) {
    auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) raise(ErrorKind::kParse, "checkpoint " + path + " is not valid JSON");
    restore(j);
  }

  SensitivityReport report() {
    SensitivityReport r;
    r.config = cfg_.to_json();
    r.config_fingerprint = cfg_.fingerprint();
    r.classifier_fingerprint = classifier_.info().fingerprint;
    r.perturber_fingerprint = perturber_.info().fingerprint;
    for (std::size_t i = 0; i < arms_.size(); ++i) {
      const auto& a = arms_[i];
      r.words[a.word] = {a.global, a.pulls, a.best_local, retired_[i]};
    }
    r.regret = downsample(regret_.cumulative, cfg_.regret_points);
    r.counters = counters_;
    if (cfg_.record_timing) r.wall_clock_ms = elapsed_ms_;
    return r;
  }

 private:
  // Selection over the arms still in play; nullopt once all are retired.
  std::optional<std::size_t> select(Rng& rng) const {
    if (std::none_of(retired_.begin(), retired_.end(), [](bool r) { return r; })) {
      return cfg_.strategy == Strategy::kUcb1 ? select_ucb1(arms_, counters_.steps) : select_thompson(arms_, rng);
    }
    std::vector<std::size_t> active;
    std::vector<ArmState> view;
    for (std::size_t i = 0; i < arms_.size(); ++i) {
      if (retired_[i]) continue;
      active.push_back(i);
      view.push_back(arms_[i]);
    }
    if (active.empty()) return std::nullopt;
    return active[cfg_.strategy == Strategy::kUcb1 ? select_ucb1(view, counters_.steps) : select_thompson(view, rng)];
  }

  nlohmann::json retired_words() const {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < arms_.size(); ++i) {
      if (retired_[i]) out.push_back(arms_[i].word);
    }
    return out;
  }

  std::optional<double> probe(const std::string& word, const Posting& p, OracleCounters& oc) {
    const Document& doc = docs_[p.doc];
    auto batch = try_perturb(word, doc, tokens_[p.doc][p.position], cfg_.n_repl, perturber_, classifier_, lowercase_, &oc);
    if (!batch) return std::nullopt;
    return local_reward(*batch, cfg_.reward_mode, doc.gold_label).value;
  }

  double exhaustive_best_local(const std::string& word) {
    double best = 0.0;
    for (const Posting& p : index_.postings_for(word)) {
      if (auto r = probe(word, p, counters_.oracle)) best = std::max(best, *r);
    }
    return best;
  }

  const ArmIndex& index_;
  const std::vector<Document>& docs_;
  bool lowercase_;
  RunConfig cfg_;
  Classifier& classifier_;
  Perturber& perturber_;
  Rng rng_;
  std::vector<std::vector<Token>> tokens_;
  std::vector<ArmState> arms_;
  std::vector<bool> retired_;
  RegretTrace regret_;
  RunCounters counters_;
  double elapsed_ms_ = 0.0;
};

/// Runs `cfg.iterations` steps from scratch and returns the report.
inline SensitivityReport run(const ArmIndex& index, const std::vector<Document>& docs,
                             const PreprocessConfig& preprocess_cfg, const RunConfig& cfg, Classifier& classifier,
                             Perturber& perturber) {
  Engine engine(index, docs, preprocess_cfg, cfg, classifier, perturber);
  engine.run();
  return engine.report();
}

}  // namespace smab
