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

#ifndef MLOS_OPENSET_H_
#define MLOS_OPENSET_H_

// Open-set decision rules: peak-probability thresholding and OpenMax logit
// recalibration with per-class Weibull models of the distance tail.

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mlos/common.h"

namespace mlos {

// Shape assigned when every tail distance is identical (the MLE diverges).
inline constexpr double kDegenerateWeibullShape = 1e4;

struct WeibullFit {
  double kappa = 1.0;  // shape
  double sigma = 1.0;  // scale
  bool degenerate = false;
  int iterations = 0;
};

// Two-parameter maximum-likelihood fit on the `tau` largest distances.
// Newton iteration on the profile likelihood of the shape, safeguarded by
// bisection.
WeibullFit fit_weibull_tail(std::span<const double> distances, int tau);

double weibull_cdf(double d, double kappa, double sigma);
double weibull_log_likelihood(std::span<const double> samples, double kappa, double sigma);

struct WeibullTailModel {
  int class_index = 0;
  Eigen::VectorXd mav;
  double kappa = 1.0;
  double sigma = 1.0;
  int tau = 0;
  bool degenerate = false;
};

struct OpenMaxConfig {
  int alpha = 1;
  double delta = 0.5;
  int tau = 20;

  void validate(int n_classes) const;
};

// Activation vectors of the qualifying training examples, grouped by class
// (output index).
using ClassActivations = std::vector<std::vector<Eigen::VectorXd>>;

// Mean activation vector per class. Throws naming every class with fewer than
// `min_count` qualifying activations.
std::vector<Eigen::VectorXd> fit_mav(const ClassActivations& activations, int min_count);

// Multi-class membership: the example is counted for `label` only when the
// prediction is correct.
bool qualifies_multiclass(const Eigen::VectorXd& logits, int label);
// Multi-label membership: ground-truth positives that also appear in the
// oracle top-m prediction.
LabelSet qualifying_multilabel(const Eigen::VectorXd& logits, const LabelSet& truth, int m);

// MAVs plus each class's largest MAV distances (descending), enough to refit
// the Weibull models for any tail size up to `max_tau`.
struct TailCalibration {
  std::vector<Eigen::VectorXd> mavs;
  std::vector<std::vector<double>> tail_distances;

  int n_classes() const { return static_cast<int>(mavs.size()); }
  // Largest tail size every class can support.
  int max_tau() const;
};

TailCalibration calibrate_tails(const ClassActivations& activations, int min_count, int max_tau);
std::vector<WeibullTailModel> fit_openmax_models(const TailCalibration& calibration, int tau);

struct Recalibration {
  Eigen::VectorXd logits;      // v_w
  double unknown_logit = 0.0;  // v_0
};

// Penalizes the alpha highest logits by their Weibull outlier weight and
// collects the removed mass into an unknown logit.
Recalibration openmax_recalibrate(const Eigen::VectorXd& logits,
                                  std::span<const WeibullTailModel> models, int alpha);

struct OpenSetDecision {
  int unknown = 0;  // 1 when an unknown class is predicted present
  std::optional<Eigen::VectorXd> recalibrated;
  std::optional<double> unknown_probability;
};

OpenSetDecision decide_msp(const Eigen::VectorXd& probabilities, double delta);
OpenSetDecision decide_msp_per_source(std::span<const Eigen::VectorXd> probabilities, double delta);

enum class OutputActivation { kSoftmax, kSigmoid };

OpenSetDecision decide_openmax(const Eigen::VectorXd& logits,
                               std::span<const WeibullTailModel> models,
                               const OpenMaxConfig& config, OutputActivation activation);
// Applies the softmax OpenMax rule to every source and ORs the decisions.
OpenSetDecision decide_openmax_per_source(std::span<const Eigen::VectorXd> source_logits,
                                          std::span<const WeibullTailModel> models,
                                          const OpenMaxConfig& config);

void save_tail_calibration(const std::filesystem::path& bin_path, const TailCalibration& calibration,
                           int tau);
TailCalibration load_tail_calibration(const std::filesystem::path& bin_path);

}  // namespace mlos

#endif  // MLOS_OPENSET_H_
