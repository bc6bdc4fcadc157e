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

#include "mlos/eval.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace mlos {

UnknownDetectionReport unknown_detection_accuracy(std::span<const int> decisions,
                                                  std::span<const int> truth) {
  if (decisions.size() != truth.size())
    throw std::invalid_argument(fmt::format("{} decisions for {} clips", decisions.size(), truth.size()));
  if (truth.empty()) throw std::invalid_argument("unknown detection on an empty set");
  UnknownDetectionReport r;
  r.total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool pred = decisions[i] != 0;
    const bool real = truth[i] != 0;
    if (pred && real) ++r.counts.tp;
    else if (!pred && !real) ++r.counts.tn;
    else if (pred) ++r.counts.fp;
    else ++r.counts.fn;
  }
  r.accuracy = static_cast<double>(r.counts.tp + r.counts.tn) / static_cast<double>(r.total);
  return r;
}

bool has_unknown(const LabelSet& labels, const std::vector<ClassId>& unknown_classes) {
  return std::any_of(labels.begin(), labels.end(), [&](ClassId c) {
    return std::binary_search(unknown_classes.begin(), unknown_classes.end(), c);
  });
}

double majority_baseline(std::span<const int> truth) {
  if (truth.empty()) throw std::invalid_argument("baseline of an empty set");
  const auto pos = static_cast<double>(std::count_if(truth.begin(), truth.end(), [](int t) { return t != 0; }));
  const double n = static_cast<double>(truth.size());
  return std::max(pos, n - pos) / n;
}

namespace {

void check_pair(std::span<const LabelSet> predicted, std::span<const LabelSet> truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument(fmt::format("{} predictions for {} clips", predicted.size(), truth.size()));
  if (truth.empty()) throw std::invalid_argument("closed-set metrics on an empty evaluation set");
}

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

double micro_f1(std::span<const LabelSet> predicted, std::span<const LabelSet> truth) {
  check_pair(predicted, truth);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::set<ClassId> p(predicted[i].begin(), predicted[i].end());
    const std::set<ClassId> t(truth[i].begin(), truth[i].end());
    for (ClassId c : p) (t.count(c) ? tp : fp)++;
    for (ClassId c : t)
      if (!p.count(c)) ++fn;
  }
  return f1(tp, fp, fn);
}

double macro_f1(std::span<const LabelSet> predicted, std::span<const LabelSet> truth,
                std::span<const ClassId> classes) {
  check_pair(predicted, truth);
  if (classes.empty()) throw std::invalid_argument("macro F1 needs at least one class");
  double total = 0.0;
  for (ClassId c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool p = std::find(predicted[i].begin(), predicted[i].end(), c) != predicted[i].end();
      const bool t = std::find(truth[i].begin(), truth[i].end(), c) != truth[i].end();
      if (p && t) ++tp;
      else if (p) ++fp;
      else if (t) ++fn;
    }
    total += f1(tp, fp, fn);
  }
  return total / static_cast<double>(classes.size());
}

double average_precision(std::span<const double> scores, std::span<const int> relevant) {
  if (scores.size() != relevant.size()) throw std::invalid_argument("scores and relevance differ in size");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (relevant[order[rank]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) throw std::invalid_argument("average precision needs at least one positive");
  return sum / static_cast<double>(hits);
}

MapResult mean_average_precision(const Eigen::MatrixXd& scores, std::span<const LabelSet> truth,
                                 std::span<const ClassId> classes) {
  if (scores.rows() != static_cast<Eigen::Index>(truth.size()) ||
      scores.cols() != static_cast<Eigen::Index>(classes.size()))
    throw std::invalid_argument("score matrix must be clips x classes");
  MapResult r;
  std::vector<double> column(truth.size());
  std::vector<int> relevant(truth.size());
  double total = 0.0;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    bool any = false;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      column[i] = scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      relevant[i] = std::binary_search(truth[i].begin(), truth[i].end(), classes[k]) ? 1 : 0;
      any = any || relevant[i];
    }
    if (!any) {
      r.excluded.push_back(classes[k]);
      continue;
    }
    const double ap = average_precision(column, relevant);
    r.per_class.emplace_back(classes[k], ap);
    total += ap;
  }
  if (r.per_class.empty()) throw std::invalid_argument("no class has a positive clip; mAP undefined");
  r.map = total / static_cast<double>(r.per_class.size());
  return r;
}

ClosedSetReport closed_set_report(std::span<const LabelSet> predicted,
                                  std::span<const LabelSet> truth, const Eigen::MatrixXd& scores,
                                  std::span<const ClassId> known_classes,
                                  const std::vector<ClassId>& unknown_classes) {
  if (predicted.size() != truth.size() || scores.rows() != static_cast<Eigen::Index>(truth.size()))
    throw std::invalid_argument("closed-set inputs differ in clip count");
  ClosedSetReport report;
  std::vector<LabelSet> kept_pred, kept_truth;
  std::vector<Eigen::Index> kept_rows;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (has_unknown(truth[i], unknown_classes)) {
      ++report.clips_skipped_unknown;
      continue;
    }
    kept_pred.push_back(predicted[i]);
    kept_truth.push_back(truth[i]);
    kept_rows.push_back(static_cast<Eigen::Index>(i));
  }
  report.clips_evaluated = kept_truth.size();
  report.micro_f1 = micro_f1(kept_pred, kept_truth);
  report.macro_f1 = macro_f1(kept_pred, kept_truth, known_classes);
  const Eigen::MatrixXd kept_scores = scores(kept_rows, Eigen::all);
  MapResult m = mean_average_precision(kept_scores, kept_truth, known_classes);
  report.map = m.map;
  report.per_class_ap = std::move(m.per_class);
  report.map_excluded = std::move(m.excluded);
  return report;
}

MetricSummary summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("cannot summarize zero values");
  MetricSummary s;
  s.values.assign(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

VariantAggregate aggregate_variants(const std::map<std::string, std::vector<double>>& metrics,
                                    std::size_t expected_variants) {
  VariantAggregate out;
  for (const auto& [name, values] : metrics) {
    if (values.size() != expected_variants)
      throw std::invalid_argument(fmt::format("metric '{}' has {} of {} variant reports", name,
                                              values.size(), expected_variants));
    out.emplace(name, summarize(values));
  }
  return out;
}

std::string format_mean_sd(const MetricSummary& m, int mean_decimals, int sd_decimals) {
  return fmt::format("{:.{}f} ({:.{}f})", m.mean, mean_decimals, m.sd, sd_decimals);
}

}  // namespace mlos
