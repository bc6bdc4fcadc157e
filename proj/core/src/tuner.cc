// Copyright 2026 The mlosbench Authors.
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

#include "mlos/tuner.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "mlos/common.h"
#include "mlos/random.h"

namespace mlos {

namespace {

double radical_inverse(int index, int base) {
  double result = 0.0;
  double f = 1.0 / base;
  for (int i = index; i > 0; i /= base) {
    result += f * (i % base);
    f /= base;
  }
  return result;
}

double shifted(double u, double shift) {
  const double v = u + shift;
  return v - std::floor(v);
}

int to_int_range(double u, int lo, int hi) {
  return std::min(hi, lo + static_cast<int>(std::floor(u * (hi - lo + 1))));
}

}  // namespace

SearchSpace SearchSpace::delta_sweep() {
  SearchSpace s;
  s.delta_only = true;
  return s;
}

void SearchSpace::validate() const {
  if (!(delta_min <= delta_max)) throw ConfigError("delta bounds are not ordered");
  if (delta_only) return;
  if (tau_min < 1 || tau_min > tau_max) throw ConfigError("tau bounds are not ordered");
  if (alpha_min < 1 || alpha_min > alpha_max) throw ConfigError("alpha bounds are not ordered");
}

TrialParams sample_trial(const SearchSpace& space, int index, std::uint64_t seed) {
  Rng rng(derive_seed(seed, stream_id("halton-shift")));
  const double s_delta = uniform(rng, 0.0, 1.0);
  const double s_tau = uniform(rng, 0.0, 1.0);
  const double s_alpha = uniform(rng, 0.0, 1.0);
  // Index 0 of a Halton sequence is the origin; start at 1.
  const int h = index + 1;
  TrialParams p;
  p.delta = space.delta_min + (space.delta_max - space.delta_min) * shifted(radical_inverse(h, 2), s_delta);
  if (space.delta_only) {
    p.tau = space.fixed_tau;
    p.alpha = space.fixed_alpha;
  } else {
    p.tau = to_int_range(shifted(radical_inverse(h, 3), s_tau), space.tau_min, space.tau_max);
    p.alpha = to_int_range(shifted(radical_inverse(h, 5), s_alpha), space.alpha_min, space.alpha_max);
  }
  return p;
}

TuneResult tune(const Objective& objective, const SearchSpace& space, int budget,
                std::uint64_t seed) {
  space.validate();
  if (budget < 1) throw ConfigError("tuning budget must be >= 1");
  TuneResult result;
  for (int t = 0; t < budget; ++t) {
    TrialRecord rec;
    rec.trial = t;
    rec.params = sample_trial(space, t, seed);
    rec.seed = derive_seed(seed, stream_id("trial"), static_cast<std::uint64_t>(t));
    try {
      rec.objective = objective(rec.params);
      if (!std::isfinite(rec.objective)) throw std::runtime_error("objective is not finite");
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
      rec.objective = std::nan("");
      std::cerr << fmt::format("tuner: trial {} failed and is skipped: {}\n", t, e.what());
    }
    if (!rec.failed && (result.best_trial < 0 || rec.objective > result.best_objective)) {
      result.best = rec.params;
      result.best_objective = rec.objective;
      result.best_trial = t;
    }
    result.log.push_back(std::move(rec));
  }
  if (result.best_trial < 0) throw std::runtime_error("every tuning trial failed");
  return result;
}

std::string trial_log_csv(const std::vector<TrialRecord>& log) {
  std::ostringstream out;
  out << "trial,delta,tau,alpha,objective,seed\n";
  for (const auto& r : log) {
    out << fmt::format("{},{:.17g},{},{},{},{}\n", r.trial, r.params.delta, r.params.tau,
                       r.params.alpha, r.failed ? std::string("failed") : fmt::format("{:.17g}", r.objective),
                       r.seed);
  }
  return out.str();
}

}  // namespace mlos
