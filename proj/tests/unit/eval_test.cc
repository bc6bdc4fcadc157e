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

#include <gtest/gtest.h>

#include <cmath>

#include "mlos/random.h"
#include "oracles.h"

namespace mlos {
namespace {

TEST(UnknownDetection, PerfectAndBaseRate) {
  const std::vector<int> truth = {1, 0, 0, 1, 0, 0, 1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(unknown_detection_accuracy(truth, truth).accuracy, 1.0);
  const std::vector<int> known(10, 0);
  EXPECT_DOUBLE_EQ(unknown_detection_accuracy(known, truth).accuracy, 0.6);
  EXPECT_DOUBLE_EQ(majority_baseline(truth), 0.6);
}

TEST(UnknownDetection, ConfusionCells) {
  const std::vector<int> d = {1, 1, 0, 0, 1}, t = {1, 0, 0, 1, 1};
  const auto r = unknown_detection_accuracy(d, t);
  EXPECT_EQ(r.counts.tp, 2u);
  EXPECT_EQ(r.counts.fp, 1u);
  EXPECT_EQ(r.counts.tn, 1u);
  EXPECT_EQ(r.counts.fn, 1u);
  EXPECT_DOUBLE_EQ(r.accuracy, 3.0 / 5.0);
}

TEST(UnknownDetection, ConstantPredictorIsBaseRate) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<int> truth(1 + t);
    int ones = 0;
    for (int& x : truth) ones += (x = uniform_int(rng, 0, 1));
    const std::vector<int> zeros(truth.size(), 0), all(truth.size(), 1);
    const double n = static_cast<double>(truth.size());
    EXPECT_DOUBLE_EQ(unknown_detection_accuracy(zeros, truth).accuracy, (n - ones) / n);
    EXPECT_DOUBLE_EQ(unknown_detection_accuracy(all, truth).accuracy, ones / n);
  }
}

TEST(HasUnknown, Lookup) {
  EXPECT_TRUE(has_unknown({1, 5}, {2, 5, 9}));
  EXPECT_FALSE(has_unknown({1, 3}, {2, 5, 9}));
  EXPECT_FALSE(has_unknown({}, {2}));
}

TEST(F1, PerfectAndTotalMiss) {
  const std::vector<LabelSet> t = {{1}, {2}}, p = {{2}, {1}};
  const std::vector<ClassId> classes = {1, 2};
  EXPECT_DOUBLE_EQ(micro_f1(t, t), 1.0);
  EXPECT_DOUBLE_EQ(macro_f1(t, t, classes), 1.0);
  EXPECT_DOUBLE_EQ(micro_f1(p, t), 0.0);
}

TEST(F1, HandExample) {
  // TP = 3, FP = 1, FN = 1 -> 6 / 8
  const std::vector<LabelSet> t = {{1, 2}, {3}, {1}}, p = {{1}, {3}, {1, 2}};
  EXPECT_DOUBLE_EQ(micro_f1(p, t), 0.75);
  // class 1: 2/2/0/0 -> 1; class 2: tp 0 fp 1 fn 1 -> 0; class 3: 1
  const std::vector<ClassId> classes = {1, 2, 3};
  EXPECT_DOUBLE_EQ(macro_f1(p, t, classes), 2.0 / 3.0);
}

TEST(F1, EmptyIsZero) {
  const std::vector<LabelSet> none = {{}, {}};
  EXPECT_DOUBLE_EQ(micro_f1(none, none), 0.0);
}

TEST(F1, MatchesBruteForce) {
  Rng rng(2);
  for (int t = 0; t < 1000; ++t) {
    const int clips = uniform_int(rng, 1, 8), n_cls = uniform_int(rng, 1, 6);
    std::vector<LabelSet> p(clips), y(clips);
    for (int i = 0; i < clips; ++i)
      for (int c = 0; c < n_cls; ++c) {
        if (uniform_int(rng, 0, 2) == 0) p[i].push_back(c);
        if (uniform_int(rng, 0, 2) == 0) y[i].push_back(c);
      }
    std::vector<ClassId> classes(n_cls);
    for (int c = 0; c < n_cls; ++c) classes[c] = c;
    EXPECT_NEAR(micro_f1(p, y), oracle::micro_f1(p, y), 1e-12);
    EXPECT_NEAR(macro_f1(p, y, classes), oracle::macro_f1(p, y, classes), 1e-12);
  }
}

TEST(AveragePrecision, Examples) {
  const std::vector<double> s = {0.9, 0.8, 0.7};
  const std::vector<int> r = {1, 0, 1};
  EXPECT_DOUBLE_EQ(average_precision(s, r), 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{0.9, 0.5, 0.1}, std::vector<int>{1, 1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}), 0.5);
}

TEST(AveragePrecision, TiesFollowClipOrder) {
  const std::vector<double> s = {0.5, 0.5};
  EXPECT_DOUBLE_EQ(average_precision(s, std::vector<int>{1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(average_precision(s, std::vector<int>{0, 1}), 0.5);
}

TEST(Map, MatchesBruteForceAndMonotoneInvariance) {
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    const int clips = uniform_int(rng, 1, 9), n_cls = uniform_int(rng, 1, 5);
    Eigen::MatrixXd scores(clips, n_cls);
    std::vector<LabelSet> truth(clips);
    for (int i = 0; i < clips; ++i)
      for (int c = 0; c < n_cls; ++c) {
        // Coarse grid so ties occur.
        scores(i, c) = uniform_int(rng, 0, 4) / 4.0;
        if (uniform_int(rng, 0, 1)) truth[i].push_back(c);
      }
    std::vector<ClassId> classes(n_cls);
    for (int c = 0; c < n_cls; ++c) classes[c] = c;

    double total = 0;
    int counted = 0;
    for (int c = 0; c < n_cls; ++c) {
      std::vector<double> s(clips);
      std::vector<int> rel(clips);
      int pos = 0;
      for (int i = 0; i < clips; ++i) {
        s[i] = scores(i, c);
        rel[i] = std::count(truth[i].begin(), truth[i].end(), c) > 0;
        pos += rel[i];
      }
      if (pos == 0) continue;
      total += oracle::average_precision(s, rel);
      ++counted;
    }
    if (counted == 0) {
      EXPECT_THROW(mean_average_precision(scores, truth, classes), std::invalid_argument);
      continue;
    }
    const MapResult m = mean_average_precision(scores, truth, classes);
    EXPECT_NEAR(m.map, counted ? total / counted : 0.0, 1e-12);
    EXPECT_EQ(static_cast<int>(m.excluded.size()), n_cls - counted);

    const Eigen::MatrixXd warped = scores.unaryExpr([](double x) { return std::exp(3 * x) - 7; });
    EXPECT_NEAR(mean_average_precision(warped, truth, classes).map, m.map, 1e-12);
  }
}

TEST(ClosedSet, SkipsUnknownClips) {
  const std::vector<LabelSet> truth = {{1}, {1, 9}, {2}, {9}};
  const std::vector<LabelSet> good = {{1}, {1}, {2}, {2}};
  std::vector<LabelSet> poisoned = good;
  poisoned[1] = {2};
  poisoned[3] = {1};
  Eigen::MatrixXd scores(4, 2);
  scores << 0.9, 0.1, 0.2, 0.8, 0.1, 0.9, 0.7, 0.3;
  Eigen::MatrixXd poisoned_scores = scores;
  poisoned_scores.row(1) << 0.0, 1.0;
  poisoned_scores.row(3) << 1.0, 0.0;
  const std::vector<ClassId> known = {1, 2}, unknown = {9};
  const auto a = closed_set_report(good, truth, scores, known, unknown);
  const auto b = closed_set_report(poisoned, truth, poisoned_scores, known, unknown);
  EXPECT_EQ(a.clips_evaluated, 2u);
  EXPECT_EQ(a.clips_skipped_unknown, 2u);
  EXPECT_DOUBLE_EQ(a.micro_f1, 1.0);
  EXPECT_DOUBLE_EQ(a.micro_f1, b.micro_f1);
  EXPECT_DOUBLE_EQ(a.macro_f1, b.macro_f1);
  EXPECT_DOUBLE_EQ(a.map, b.map);
  EXPECT_DOUBLE_EQ(a.map, 1.0);
}

TEST(Aggregate, Summaries) {
  const std::vector<double> same = {3, 3, 3};
  EXPECT_DOUBLE_EQ(summarize(same).sd, 0.0);
  const std::vector<double> a = {57, 58, 59, 60, 61};
  EXPECT_DOUBLE_EQ(summarize(a).mean, 59.0);
  const std::vector<double> b = {1, 2, 3, 4, 5};
  EXPECT_NEAR(summarize(b).sd, std::sqrt(2.5), 1e-15);
  EXPECT_NEAR(summarize(b).sd, 1.581, 1e-3);
}

TEST(Aggregate, VariantCountIsChecked) {
  std::map<std::string, std::vector<double>> m = {{"acc", {1, 2, 3}}};
  EXPECT_EQ(aggregate_variants(m, 3).at("acc").values.size(), 3u);
  EXPECT_THROW(aggregate_variants(m, 5), std::invalid_argument);
}

TEST(Aggregate, Formatting) {
  MetricSummary s;
  s.mean = 59.66;
  s.sd = 1.04;
  EXPECT_EQ(format_mean_sd(s, 1, 1), "59.7 (1.0)");
  s.mean = 0.4494;
  s.sd = 0.0123;
  EXPECT_EQ(format_mean_sd(s, 3, 2), "0.449 (0.01)");
}

}  // namespace
}  // namespace mlos
