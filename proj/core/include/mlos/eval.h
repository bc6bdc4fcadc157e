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

#ifndef MLOS_EVAL_H_
#define MLOS_EVAL_H_

// Clip-level unknown detection and closed-set tagging metrics, plus
// aggregation over dataset variants.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlos/common.h"

namespace mlos {

struct ConfusionCounts {
  std::size_t tp = 0;  // unknown present, predicted unknown
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct UnknownDetectionReport {
  double accuracy = 0.0;
  ConfusionCounts counts;
  std::size_t total = 0;
};

UnknownDetectionReport unknown_detection_accuracy(std::span<const int> decisions,
                                                  std::span<const int> truth);

// True when any label is one of the (sorted) unknown classes.
bool has_unknown(const LabelSet& labels, const std::vector<ClassId>& unknown_classes);

// Accuracy of always predicting the more frequent truth value.
double majority_baseline(std::span<const int> truth);

double micro_f1(std::span<const LabelSet> predicted, std::span<const LabelSet> truth);
double macro_f1(std::span<const LabelSet> predicted, std::span<const LabelSet> truth,
                std::span<const ClassId> classes);

// Descending-score average precision; ties keep clip order.
double average_precision(std::span<const double> scores, std::span<const int> relevant);

struct MapResult {
  double map = 0.0;
  std::vector<std::pair<ClassId, double>> per_class;
  std::vector<ClassId> excluded;  // no positive clip
};

// `scores` is clips x classes; column k scores `classes[k]`.
MapResult mean_average_precision(const Eigen::MatrixXd& scores, std::span<const LabelSet> truth,
                                 std::span<const ClassId> classes);

struct ClosedSetReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double map = 0.0;
  std::vector<std::pair<ClassId, double>> per_class_ap;
  std::vector<ClassId> map_excluded;
  std::size_t clips_evaluated = 0;
  std::size_t clips_skipped_unknown = 0;
};

// Restricts every metric to clips whose truth has no unknown class.
ClosedSetReport closed_set_report(std::span<const LabelSet> predicted,
                                  std::span<const LabelSet> truth, const Eigen::MatrixXd& scores,
                                  std::span<const ClassId> known_classes,
                                  const std::vector<ClassId>& unknown_classes);

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1)
  std::vector<double> values;
};

using VariantAggregate = std::map<std::string, MetricSummary>;

MetricSummary summarize(std::span<const double> values);
// Every metric must carry exactly `expected_variants` values.
VariantAggregate aggregate_variants(const std::map<std::string, std::vector<double>>& metrics,
                                    std::size_t expected_variants);

// "mean (sd)" with the given decimals.
std::string format_mean_sd(const MetricSummary& m, int mean_decimals, int sd_decimals);

}  // namespace mlos

#endif  // MLOS_EVAL_H_
