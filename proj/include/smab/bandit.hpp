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

// Outer-arm (word) bandit: arm state, UCB1 and Thompson selection, the
// running-mean global sensitivity update and regret accounting.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "smab/errors.hpp"
#include "smab/random.hpp"

namespace smab {

struct ArmState {
  std::string word;
  double global = 0.0;       // G, in [0,1]
  std::uint64_t pulls = 0;   // completed updating pulls
  double reward_sum = 0.0;   // sum of observed local sensitivities
  double best_local = 0.0;   // running max of observed locals (regret oracle)
  double ts_alpha = 1.0;
  double ts_beta = 1.0;

  friend bool operator==(const ArmState&, const ArmState&) = default;
};

enum class InitScheme { kClippedNormal, kBeta };

inline InitScheme parse_init_scheme(std::string_view name) {
  if (name == "clipped_normal") return InitScheme::kClippedNormal;
  if (name == "beta") return InitScheme::kBeta;
  raise(ErrorKind::kUnknownScheme, "'" + std::string(name) + "'");
}

inline std::string_view to_string(InitScheme s) {
  return s == InitScheme::kClippedNormal ? "clipped_normal" : "beta";
}

struct InitParams {
  // clipped_normal: Normal(mean, sd) truncated to [low, high]
  double mean = 0.0;
  double sd = 1.0;
  double low = 0.0;
  double high = 0.1;
  // beta: alpha0 ~ Uniform(alpha_low, alpha_high), G0 ~ Beta(alpha0, 1 - alpha0)
  double alpha_low = 0.0;
  double alpha_high = 0.5;
};

inline std::vector<ArmState> init_arms(const std::vector<std::string>& words, InitScheme scheme,
                                       const InitParams& params, Rng& rng) {
  if (words.empty()) raise(ErrorKind::kDomain, "init_arms needs at least one word");
  if (scheme == InitScheme::kBeta &&
      !(params.alpha_low >= 0.0 && params.alpha_low < params.alpha_high && params.alpha_high <= 1.0)) {
    raise(ErrorKind::kDomain, "beta init needs 0 <= alpha_low < alpha_high <= 1");
  }
  std::vector<ArmState> arms;
  arms.reserve(words.size());
  for (const auto& w : words) {
    ArmState a;
    a.word = w;
    if (scheme == InitScheme::kClippedNormal) {
      a.global = truncated_normal_draw(rng, params.mean, params.sd, params.low, params.high);
    } else {
      const double alpha0 = uniform_open(rng, params.alpha_low, params.alpha_high);
      a.global = beta_draw(rng, alpha0, 1.0 - alpha0);
      a.ts_alpha = alpha0;
      a.ts_beta = 1.0 - alpha0;
    }
    arms.push_back(std::move(a));
  }
  return arms;
}

inline std::vector<ArmState> init_arms(const std::vector<std::string>& words, InitScheme scheme,
                                       const InitParams& params, std::uint64_t seed) {
  Rng rng(seed);
  return init_arms(words, scheme, params, rng);
}

inline double ucb1_score(const ArmState& arm, std::uint64_t t) {
  return arm.global + std::sqrt(2.0 * std::log(1.0 + static_cast<double>(t)) / (1.0 + static_cast<double>(arm.pulls)));
}

namespace detail {

// argmax with ties broken toward the lexicographically smaller word
template <typename ScoreAt>
std::size_t argmax_by_word(std::span<const ArmState> arms, ScoreAt&& score_at) {
  if (arms.empty()) raise(ErrorKind::kDomain, "no arms to select from");
  std::size_t best = 0;
  double best_score = score_at(0);
  for (std::size_t i = 1; i < arms.size(); ++i) {
    const double s = score_at(i);
    if (s > best_score || (s == best_score && arms[i].word < arms[best].word)) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

}  // namespace detail

inline std::size_t select_ucb1(std::span<const ArmState> arms, std::uint64_t t) {
  return detail::argmax_by_word(arms, [&](std::size_t i) { return ucb1_score(arms[i], t); });
}

/// Draws one Beta(ts_alpha, ts_beta) sample per arm, in order, and returns
/// the argmax.
inline std::size_t select_thompson(std::span<const ArmState> arms, Rng& rng) {
  std::vector<double> draws(arms.size());
  for (std::size_t i = 0; i < arms.size(); ++i) draws[i] = beta_draw(rng, arms[i].ts_alpha, arms[i].ts_beta);
  return detail::argmax_by_word(arms, [&](std::size_t i) { return draws[i]; });
}

/// G <- (N * G + L) / (1 + N) with N the pulls completed before this one,
/// so G is exactly the running mean of observed locals.
inline ArmState update_global(ArmState arm, double local) {
  if (!(local >= 0.0 && local <= 1.0)) raise(ErrorKind::kDomain, "local sensitivity outside [0,1]");
  const double n = static_cast<double>(arm.pulls);
  arm.global = std::clamp((n * arm.global + local) / (1.0 + n), 0.0, 1.0);
  arm.pulls += 1;
  arm.reward_sum += local;
  arm.best_local = std::max(arm.best_local, local);
  arm.ts_alpha += local;
  arm.ts_beta += 1.0 - local;
  return arm;
}

struct RegretTrace {
  std::vector<double> cumulative;

  double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
  std::size_t steps() const { return cumulative.size(); }

  friend bool operator==(const RegretTrace&, const RegretTrace&) = default;
};

/// Appends R_{t-1} + (L* - L) * G for the arm just updated.
inline void update_regret(RegretTrace& trace, const ArmState& arm, double local) {
  const double gap = std::max(arm.best_local - local, 0.0);
  trace.cumulative.push_back(trace.total() + gap * arm.global);
}

inline nlohmann::json to_json(const ArmState& a) {
  return {{"word", a.word},           {"g", a.global},          {"n", a.pulls},       {"reward_sum", a.reward_sum},
          {"l_star", a.best_local}, {"ts_alpha", a.ts_alpha}, {"ts_beta", a.ts_beta}};
}

inline ArmState arm_state_from_json(const nlohmann::json& j) {
  ArmState a;
  a.word = j.at("word").get<std::string>();
  a.global = j.at("g").get<double>();
  a.pulls = j.at("n").get<std::uint64_t>();
  a.reward_sum = j.at("reward_sum").get<double>();
  a.best_local = j.at("l_star").get<double>();
  a.ts_alpha = j.at("ts_alpha").get<double>();
  a.ts_beta = j.at("ts_beta").get<double>();
  return a;
}

}  // namespace smab
