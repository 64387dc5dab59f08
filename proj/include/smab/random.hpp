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

// Seeded randomness. Every sampler below builds its distribution objects per
// call, so a draw depends only on the engine state; that is what makes
// checkpoint/resume bit-exact.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "smab/errors.hpp"

namespace smab {

using Rng = std::mt19937_64;

inline std::string rng_state(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

inline Rng rng_from_state(const std::string& state) {
  Rng rng;
  std::istringstream in(state);
  in >> rng;
  if (!in) raise(ErrorKind::kParse, "corrupt RNG state");
  return rng;
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform on the open interval (lo, hi).
inline double uniform_open(Rng& rng, double lo, double hi) {
  double u = 0.0;
  do {
    u = uniform01(rng);
  } while (u == 0.0);
  return lo + (hi - lo) * u;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(rng);
}

/// log of a Gamma(shape, 1) draw. Shapes below 1 use
/// Gamma(a) = Gamma(a + 1) * U^(1/a), evaluated in log space so tiny shapes
/// do not underflow.
inline double log_gamma_draw(Rng& rng, double shape) {
  if (shape >= 1.0) {
    std::gamma_distribution<double> dist(shape, 1.0);
    return std::log(dist(rng));
  }
  std::gamma_distribution<double> dist(shape + 1.0, 1.0);
  const double g = dist(rng);
  const double u = uniform_open(rng, 0.0, 1.0);
  return std::log(g) + std::log(u) / shape;
}

/// Beta(a, b) draw via the ratio of two Gamma draws.
inline double beta_draw(Rng& rng, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) raise(ErrorKind::kDomain, "Beta parameters must be positive");
  const double la = log_gamma_draw(rng, a);
  const double lb = log_gamma_draw(rng, b);
  const double x = 1.0 / (1.0 + std::exp(lb - la));
  return std::clamp(x, 0.0, 1.0);
}

/// Normal(mean, sd) restricted to [lo, hi], sampled by inverting the CDF.
inline double truncated_normal_draw(Rng& rng, double mean, double sd, double lo, double hi) {
  if (!(sd > 0.0) || !(lo < hi)) raise(ErrorKind::kDomain, "truncated normal needs sd > 0 and lo < hi");
  const boost::math::normal_distribution<double> dist(mean, sd);
  const double cl = boost::math::cdf(dist, lo);
  const double ch = boost::math::cdf(dist, hi);
  if (!(ch > cl)) return std::clamp(mean, lo, hi);
  const double p = cl + (ch - cl) * uniform_open(rng, 0.0, 1.0);
  return std::clamp(boost::math::quantile(dist, p), lo, hi);
}

}  // namespace smab
