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

#ifndef MLOS_DATASET_PLAN_H_
#define MLOS_DATASET_PLAN_H_

// Class vocabularies, KK/KU/UU split variants with controlled openness, and
// timing-level soundscape and clip specifications. No audio is rendered here;
// everything downstream consumes these specs.

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlos/common.h"

namespace mlos {

struct ClassVocabulary {
  std::vector<ClassId> classes;  // 0..C-1
  std::vector<double> weights;   // relative frequency, sums to 1

  static ClassVocabulary uniform(int n_classes);
  // Weight of class k proportional to 1 / (k + 1)^exponent.
  static ClassVocabulary power_law(int n_classes, double exponent);

  int size() const { return static_cast<int>(classes.size()); }
  void validate() const;
};

struct OpennessReport {
  int c_tr = 0;  // classes seen during training, |KK u KU|
  int c_te = 0;  // classes seen at test, |KK u KU u UU|
  double o_star = 0.0;
};

// 1 - sqrt(2 c_tr / (c_tr + c_te)). Requires 1 <= c_tr <= c_te.
OpennessReport compute_openness(int c_tr, int c_te);

struct ClassSplit {
  int variant_id = 1;  // 1-based, as in the published table
  OpennessMode mode = OpennessMode::kHigh;
  std::vector<std::vector<ClassId>> subsets;
  std::vector<SplitTag> assignment;  // one tag per subset

  // Training-visible classes (KK u KU), ascending.
  std::vector<ClassId> known_classes() const;
  // Test-only classes (UU), ascending.
  std::vector<ClassId> unknown_classes() const;
  std::vector<ClassId> all_classes() const;
  SplitTag tag_of(ClassId id) const;
  bool is_unknown(ClassId id) const { return tag_of(id) == SplitTag::kUnknownUnknown; }
  OpennessReport openness() const;
  void validate() const;
};

// Tag pattern for variant 1; later variants rotate it one subset to the right.
std::vector<SplitTag> base_tag_pattern(int n_subsets, OpennessMode mode);

// Partitions the vocabulary into n_subsets contiguous blocks (larger blocks
// first) and returns n_subsets rotated variants.
std::vector<ClassSplit> make_split_variants(const ClassVocabulary& vocab,
                                            int n_subsets, OpennessMode mode);

struct EventSpec {
  ClassId class_id = 0;
  double onset = 0.0;     // seconds
  double duration = 0.0;  // seconds
  double pitch_shift = 0.0;   // semitones
  double time_stretch = 1.0;  // factor

  double end() const { return onset + duration; }
};

struct SoundscapeSpec {
  std::int64_t id = 0;
  double duration = 10.0;
  std::vector<EventSpec> events;
};

struct ClipSpec {
  std::int64_t id = 0;
  std::int64_t soundscape_id = 0;
  double start = 0.0;
  double end = 1.0;
  LabelSet labels;
  int polyphony = 0;                // m, distinct overlapping events
  std::vector<int> event_indices;   // into the soundscape's events
  std::vector<double> overlaps;     // seconds of overlap per listed event
};

struct SamplingOptions {
  double soundscape_duration = 10.0;
  double max_onset = 9.0;
  double min_event_duration = 0.5;
  double max_event_duration = 4.0;
  double max_pitch_shift = 2.0;
  double min_time_stretch = 0.8;
  double max_time_stretch = 1.2;
  int max_polyphony = 4;
  int min_examples_per_class = 1;
  // When false, a minimum the pool cannot hold is lowered to what it can.
  bool strict_minimum = true;
};

// Virtual source identifier of an event. Pools occupy disjoint ranges, so no
// source is shared between train, validation, test and tuning data.
std::int64_t virtual_source_id(Pool pool, std::int64_t soundscape_id,
                               int event_index);

// Per-class minimum at desk scale: ceil(200 * n / 200000).
int scaled_min_examples(int n_soundscapes);

std::vector<SoundscapeSpec> sample_soundscape_specs(
    const ClassSplit& split, const ClassVocabulary& vocab, int n, Pool pool,
    std::uint64_t seed, const SamplingOptions& options = {});

// One 1 s clip per event, centred on the event and shifted inward at the
// soundscape boundaries. `first_clip_id` numbers the clips consecutively.
std::vector<ClipSpec> window_clips(const SoundscapeSpec& spec,
                                   std::int64_t first_clip_id = 0,
                                   double window = 1.0);

// Length of the intersection of [a0, a1] and [b0, b1]; zero when they only
// touch.
double overlap_length(double a0, double a1, double b0, double b1);

// Line-delimited JSON.
nlohmann::json to_json(const SoundscapeSpec& spec);
nlohmann::json to_json(const ClipSpec& clip);
nlohmann::json to_json(const ClassSplit& split);
SoundscapeSpec soundscape_from_json(const nlohmann::json& j);
ClipSpec clip_from_json(const nlohmann::json& j);
ClassSplit split_from_json(const nlohmann::json& j);

}  // namespace mlos

#endif  // MLOS_DATASET_PLAN_H_
