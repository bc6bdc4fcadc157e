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

#include "mlos/dataset_plan.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace mlos {
namespace {

double round2(double x) { return std::round(x * 100.0) / 100.0; }

TEST(Openness, PublishedValues) {
  EXPECT_DOUBLE_EQ(round2(compute_openness(54, 89).o_star), 0.13);
  EXPECT_DOUBLE_EQ(round2(compute_openness(53, 89).o_star), 0.14);
  EXPECT_DOUBLE_EQ(round2(compute_openness(72, 89).o_star), 0.05);
  EXPECT_DOUBLE_EQ(round2(compute_openness(71, 89).o_star), 0.06);
}

TEST(Openness, ClosedSetIsZero) {
  for (int c = 1; c <= 200; ++c) EXPECT_NEAR(compute_openness(c, c).o_star, 0.0, 1e-15);
}

TEST(Openness, DecreasesWithTrainingClasses) {
  for (int c_te = 2; c_te <= 120; ++c_te)
    for (int c_tr = 1; c_tr < c_te; ++c_tr)
      EXPECT_GT(compute_openness(c_tr, c_te).o_star, compute_openness(c_tr + 1, c_te).o_star);
}

TEST(Openness, RejectsBadCounts) {
  EXPECT_THROW(compute_openness(0, 5), std::invalid_argument);
  EXPECT_THROW(compute_openness(6, 5), std::invalid_argument);
}

using T = SplitTag;
constexpr T KK = T::kKnownKnown, KU = T::kKnownUnknown, UU = T::kUnknownUnknown;

TEST(SplitVariants, HighOpennessVariantOne) {
  const auto splits = make_split_variants(ClassVocabulary::uniform(89), 5, OpennessMode::kHigh);
  ASSERT_EQ(splits.size(), 5u);
  EXPECT_EQ(splits[0].assignment, (std::vector<T>{KK, KK, KK, UU, UU}));
  for (const auto& s : splits) {
    const int dk = static_cast<int>(s.known_classes().size());
    EXPECT_TRUE(dk == 53 || dk == 54) << dk;
  }
}

TEST(SplitVariants, LowOpennessVariantTwo) {
  const auto splits = make_split_variants(ClassVocabulary::uniform(89), 5, OpennessMode::kLow);
  EXPECT_EQ(splits[1].assignment, (std::vector<T>{UU, KK, KK, KK, KU}));
}

TEST(SplitVariants, SingletonSubsets) {
  const auto splits = make_split_variants(ClassVocabulary::uniform(5), 5, OpennessMode::kHigh);
  for (const auto& s : splits)
    for (const auto& sub : s.subsets) EXPECT_EQ(sub.size(), 1u);
}

TEST(SplitVariants, PartitionAndRotationCompleteness) {
  for (OpennessMode mode : {OpennessMode::kLow, OpennessMode::kHigh}) {
    for (int n_sub = 3; n_sub <= 7; ++n_sub) {
      for (int n_classes : {n_sub, 17, 89}) {
        const auto splits = make_split_variants(ClassVocabulary::uniform(n_classes), n_sub, mode);
        ASSERT_EQ(static_cast<int>(splits.size()), n_sub);
        const auto pattern = base_tag_pattern(n_sub, mode);
        for (const auto& s : splits) {
          std::vector<int> seen(n_classes, 0);
          for (const auto& sub : s.subsets)
            for (ClassId c : sub) ++seen[c];
          EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int k) { return k == 1; }));
        }
        for (int sub = 0; sub < n_sub; ++sub) {
          std::multiset<T> tags, expected(pattern.begin(), pattern.end());
          for (const auto& s : splits) tags.insert(s.assignment[sub]);
          EXPECT_EQ(tags, expected);
        }
      }
    }
  }
}

TEST(SplitVariants, JsonRoundTrip) {
  const auto splits = make_split_variants(ClassVocabulary::uniform(89), 5, OpennessMode::kLow);
  const ClassSplit back = split_from_json(to_json(splits[3]));
  EXPECT_EQ(back.subsets, splits[3].subsets);
  EXPECT_EQ(back.assignment, splits[3].assignment);
  EXPECT_EQ(back.variant_id, splits[3].variant_id);
}

ClassSplit variant_one_high() {
  return make_split_variants(ClassVocabulary::uniform(89), 5, OpennessMode::kHigh)[0];
}

TEST(Soundscapes, Deterministic) {
  const ClassSplit split = variant_one_high();
  const auto vocab = ClassVocabulary::uniform(89);
  const auto a = sample_soundscape_specs(split, vocab, 200, Pool::kTest, 7);
  const auto b = sample_soundscape_specs(split, vocab, 200, Pool::kTest, 7);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(to_json(a[i]).dump(), to_json(b[i]).dump());
}

TEST(Soundscapes, MinimumPerClass) {
  const ClassSplit split = make_split_variants(ClassVocabulary::uniform(89), 5, OpennessMode::kHigh)[2];
  ASSERT_EQ(split.known_classes().size(), 53u);
  SamplingOptions opt;
  opt.min_examples_per_class = 100;
  const auto specs = sample_soundscape_specs(split, ClassVocabulary::uniform(89), 10000, Pool::kTrain, 3, opt);
  std::map<ClassId, int> counts;
  for (const auto& s : specs)
    for (const auto& e : s.events) ++counts[e.class_id];
  EXPECT_EQ(counts.size(), 53u);
  for (const auto& [c, n] : counts) EXPECT_GE(n, 100) << "class " << c;
}

TEST(Soundscapes, EventRanges) {
  const auto specs =
      sample_soundscape_specs(variant_one_high(), ClassVocabulary::power_law(89, 1.0), 500, Pool::kTest, 11);
  for (const auto& s : specs) {
    EXPECT_GE(s.events.size(), 1u);
    EXPECT_LE(s.events.size(), 4u);
    for (const auto& e : s.events) {
      EXPECT_GE(e.onset, 0.0);
      EXPECT_LE(e.onset, 9.0);
      EXPECT_GE(e.duration, 0.5);
      EXPECT_LE(e.duration, 4.0);
      EXPECT_LE(e.end(), s.duration + 1e-12);
      EXPECT_LE(std::abs(e.pitch_shift), 2.0);
      EXPECT_GE(e.time_stretch, 0.8);
      EXPECT_LE(e.time_stretch, 1.2);
    }
  }
}

TEST(Soundscapes, TrainingPoolsHaveNoUnknownClasses) {
  const auto vocab = ClassVocabulary::uniform(89);
  for (OpennessMode mode : {OpennessMode::kLow, OpennessMode::kHigh}) {
    for (const ClassSplit& split : make_split_variants(vocab, 5, mode)) {
      for (Pool pool : {Pool::kTrain, Pool::kVal}) {
        for (const auto& s : sample_soundscape_specs(split, vocab, 300, pool, 5))
          for (const auto& e : s.events) EXPECT_FALSE(split.is_unknown(e.class_id));
      }
      bool some_unknown = false, some_clean = false;
      for (const auto& s : sample_soundscape_specs(split, vocab, 300, Pool::kTest, 5)) {
        for (const ClipSpec& c : window_clips(s)) {
          const bool u = std::any_of(c.labels.begin(), c.labels.end(),
                                     [&](ClassId id) { return split.is_unknown(id); });
          (u ? some_unknown : some_clean) = true;
        }
      }
      EXPECT_TRUE(some_unknown);
      EXPECT_TRUE(some_clean);
    }
  }
}

TEST(Soundscapes, StrictMinimumRejectsTinyPools) {
  SamplingOptions opt;
  opt.min_examples_per_class = 5;
  EXPECT_THROW(sample_soundscape_specs(variant_one_high(), ClassVocabulary::uniform(89), 3, Pool::kTest, 1, opt),
               std::invalid_argument);
  opt.strict_minimum = false;
  EXPECT_EQ(
      sample_soundscape_specs(variant_one_high(), ClassVocabulary::uniform(89), 3, Pool::kTest, 1, opt).size(),
      3u);
}

TEST(Soundscapes, VirtualSourceIdsAreDisjointAcrossPools) {
  std::set<std::int64_t> ids;
  for (Pool p : {Pool::kTrain, Pool::kVal, Pool::kTest, Pool::kTuning})
    for (std::int64_t s = 0; s < 50; ++s)
      for (int e = 0; e < 4; ++e) EXPECT_TRUE(ids.insert(virtual_source_id(p, s, e)).second);
}

SoundscapeSpec scape(std::vector<std::pair<double, double>> spans) {
  SoundscapeSpec s;
  int k = 0;
  for (auto [a, b] : spans) s.events.push_back(EventSpec{k++, a, b - a, 0.0, 1.0});
  return s;
}

TEST(WindowClips, SingleCenteredEvent) {
  const auto clips = window_clips(scape({{4.0, 5.0}}));
  ASSERT_EQ(clips.size(), 1u);
  EXPECT_DOUBLE_EQ(clips[0].start, 4.0);
  EXPECT_DOUBLE_EQ(clips[0].end, 5.0);
  EXPECT_EQ(clips[0].labels, LabelSet{0});
  EXPECT_EQ(clips[0].polyphony, 1);
}

TEST(WindowClips, TouchingEventIsExcluded) {
  const auto clips = window_clips(scape({{0.0, 2.0}, {1.5, 3.0}}));
  ASSERT_EQ(clips.size(), 2u);
  EXPECT_DOUBLE_EQ(clips[0].start, 0.5);
  EXPECT_DOUBLE_EQ(clips[0].end, 1.5);
  EXPECT_EQ(clips[0].labels, LabelSet{0});
  EXPECT_EQ(clips[0].polyphony, 1);
}

TEST(WindowClips, ClampedAtStart) {
  const auto clips = window_clips(scape({{0.0, 0.5}}));
  EXPECT_DOUBLE_EQ(clips[0].start, 0.0);
  EXPECT_DOUBLE_EQ(clips[0].end, 1.0);
}

TEST(WindowClips, ClampedAtEnd) {
  const auto clips = window_clips(scape({{9.8, 10.0}}));
  EXPECT_DOUBLE_EQ(clips[0].start, 9.0);
  EXPECT_DOUBLE_EQ(clips[0].end, 10.0);
}

// Independent interval-intersection oracle.
LabelSet oracle_labels(const SoundscapeSpec& s, double a, double b) {
  std::set<ClassId> out;
  for (const auto& e : s.events) {
    const double lo = e.onset > a ? e.onset : a;
    const double hi = e.end() < b ? e.end() : b;
    if (hi - lo > 0.0) out.insert(e.class_id);
  }
  return {out.begin(), out.end()};
}

TEST(WindowClips, LabelsMatchOverlapOracle) {
  const auto vocab = ClassVocabulary::uniform(89);
  for (const ClassSplit& split : make_split_variants(vocab, 5, OpennessMode::kHigh)) {
    std::int64_t next = 0;
    for (const auto& s : sample_soundscape_specs(split, vocab, 400, Pool::kTest, 21)) {
      const auto clips = window_clips(s, next);
      ASSERT_EQ(clips.size(), s.events.size());
      for (std::size_t i = 0; i < clips.size(); ++i) {
        const ClipSpec& c = clips[i];
        EXPECT_EQ(c.id, next + static_cast<std::int64_t>(i));
        EXPECT_NEAR(c.end - c.start, 1.0, 1e-12);
        EXPECT_GE(c.start, 0.0);
        EXPECT_LE(c.end, s.duration);
        EXPECT_EQ(c.labels, oracle_labels(s, c.start, c.end));
        EXPECT_EQ(c.polyphony, static_cast<int>(c.event_indices.size()));
        EXPECT_GE(c.polyphony, static_cast<int>(c.labels.size()));
      }
      next += static_cast<std::int64_t>(clips.size());
    }
  }
}

TEST(WindowClips, JsonRoundTrip) {
  SamplingOptions opts;
  opts.min_examples_per_class = 0;
  const auto specs =
      sample_soundscape_specs(variant_one_high(), ClassVocabulary::uniform(89), 20, Pool::kTest, 2, opts);
  for (const auto& s : specs) {
    EXPECT_EQ(to_json(soundscape_from_json(to_json(s))).dump(), to_json(s).dump());
    for (const auto& c : window_clips(s)) {
      const auto j = to_json(c);
      EXPECT_EQ(j.size(), 5u);
      for (const char* k : {"id", "soundscape_id", "window", "labels", "m"}) EXPECT_TRUE(j.contains(k)) << k;
      EXPECT_EQ(to_json(clip_from_json(j)).dump(), j.dump());
    }
  }
}

TEST(Vocabulary, PowerLawWeights) {
  const auto v = ClassVocabulary::power_law(4, 1.0);
  const double z = 1.0 + 0.5 + 1.0 / 3.0 + 0.25;
  EXPECT_NEAR(v.weights[0], 1.0 / z, 1e-15);
  EXPECT_NEAR(v.weights[3], 0.25 / z, 1e-15);
}

}  // namespace
}  // namespace mlos
