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

#ifndef MLOS_TUNER_H_
#define MLOS_TUNER_H_

// Budgeted random search over the open-set hyperparameters (delta, tau,
// alpha). Samples come from a randomly shifted Halton sequence, so every
// prefix of the trial stream is itself well spread and a larger budget only
// appends trials.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mlos {

struct SearchSpace {
  double delta_min = 0.0;
  double delta_max = 1.0;
  int tau_min = 5;
  int tau_max = 200;
  int alpha_min = 1;
  int alpha_max = 1;
  // Threshold-only searches keep tau and alpha at these values.
  bool delta_only = false;
  int fixed_tau = 20;
  int fixed_alpha = 1;

  static SearchSpace delta_sweep();
  void validate() const;
};

struct TrialParams {
  double delta = 0.5;
  int tau = 20;
  int alpha = 1;
};

struct TrialRecord {
  int trial = 0;
  TrialParams params;
  double objective = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
};

struct TuneResult {
  TrialParams best;
  double best_objective = 0.0;
  int best_trial = -1;
  std::vector<TrialRecord> log;
};

using Objective = std::function<double(const TrialParams&)>;

// Evaluates `budget` trials and returns the one with the highest objective,
// the earliest on ties. Throwing trials are recorded as failed and skipped.
TuneResult tune(const Objective& objective, const SearchSpace& space, int budget,
                std::uint64_t seed);

// Parameters of trial `index`, independent of the budget.
TrialParams sample_trial(const SearchSpace& space, int index, std::uint64_t seed);

// CSV with header: trial,delta,tau,alpha,objective,seed
std::string trial_log_csv(const std::vector<TrialRecord>& log);

}  // namespace mlos

#endif  // MLOS_TUNER_H_
