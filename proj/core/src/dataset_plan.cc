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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include <fmt/format.h>

#include "mlos/random.h"

namespace mlos {

ClassVocabulary ClassVocabulary::uniform(int n_classes) {
  if (n_classes < 1) throw std::invalid_argument("vocabulary needs >= 1 class");
  ClassVocabulary v;
  v.classes.resize(n_classes);
  std::iota(v.classes.begin(), v.classes.end(), 0);
  v.weights.assign(n_classes, 1.0 / n_classes);
  return v;
}

ClassVocabulary ClassVocabulary::power_law(int n_classes, double exponent) {
  ClassVocabulary v = uniform(n_classes);
  double total = 0.0;
  for (int k = 0; k < n_classes; ++k) {
    v.weights[k] = 1.0 / std::pow(k + 1.0, exponent);
    total += v.weights[k];
  }
  for (double& w : v.weights) w /= total;
  return v;
}

void ClassVocabulary::validate() const {
  if (classes.empty()) throw std::invalid_argument("empty vocabulary");
  if (weights.size() != classes.size())
    throw std::invalid_argument("vocabulary weights and classes differ in size");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] != static_cast<ClassId>(i))
      throw std::invalid_argument("class IDs must be contiguous from 0");
    if (!(weights[i] > 0.0))
      throw std::invalid_argument(fmt::format("class {} has non-positive weight", i));
  }
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument(fmt::format("weights sum to {}, not 1", sum));
}

OpennessReport compute_openness(int c_tr, int c_te) {
  if (c_tr < 1) throw std::invalid_argument("openness needs c_tr >= 1");
  if (c_tr > c_te)
    throw std::invalid_argument(
        fmt::format("openness needs c_tr <= c_te (got {} > {})", c_tr, c_te));
  OpennessReport r;
  r.c_tr = c_tr;
  r.c_te = c_te;
  r.o_star = 1.0 - std::sqrt(2.0 * c_tr / static_cast<double>(c_tr + c_te));
  return r;
}

std::vector<ClassId> ClassSplit::known_classes() const {
  std::vector<ClassId> out;
  for (std::size_t s = 0; s < subsets.size(); ++s)
    if (assignment[s] != SplitTag::kUnknownUnknown)
      out.insert(out.end(), subsets[s].begin(), subsets[s].end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ClassId> ClassSplit::unknown_classes() const {
  std::vector<ClassId> out;
  for (std::size_t s = 0; s < subsets.size(); ++s)
    if (assignment[s] == SplitTag::kUnknownUnknown)
      out.insert(out.end(), subsets[s].begin(), subsets[s].end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ClassId> ClassSplit::all_classes() const {
  std::vector<ClassId> out;
  for (const auto& s : subsets) out.insert(out.end(), s.begin(), s.end());
  std::sort(out.begin(), out.end());
  return out;
}

SplitTag ClassSplit::tag_of(ClassId id) const {
  for (std::size_t s = 0; s < subsets.size(); ++s)
    if (std::find(subsets[s].begin(), subsets[s].end(), id) != subsets[s].end())
      return assignment[s];
  throw std::invalid_argument(fmt::format("class {} is not in split variant {}", id, variant_id));
}

OpennessReport ClassSplit::openness() const {
  return compute_openness(static_cast<int>(known_classes().size()),
                          static_cast<int>(all_classes().size()));
}

void ClassSplit::validate() const {
  if (subsets.size() != assignment.size() || subsets.empty())
    throw std::invalid_argument("split needs one tag per subset");
  std::set<ClassId> seen;
  bool has_kk = false;
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    if (subsets[s].empty()) throw std::invalid_argument("empty subset in split");
    for (ClassId c : subsets[s])
      if (!seen.insert(c).second)
        throw std::invalid_argument(fmt::format("class {} appears in two subsets", c));
    if (assignment[s] == SplitTag::kKnownKnown) has_kk = true;
    if (mode == OpennessMode::kHigh && assignment[s] == SplitTag::kKnownUnknown)
      throw std::invalid_argument("high-openness splits cannot contain KU subsets");
  }
  if (!has_kk) throw std::invalid_argument("split has no KK subset");
  if (*seen.rbegin() != static_cast<ClassId>(seen.size()) - 1)
    throw std::invalid_argument("split does not cover a contiguous vocabulary");
}

std::vector<SplitTag> base_tag_pattern(int n_subsets, OpennessMode mode) {
  if (n_subsets < 3) throw std::invalid_argument("need at least 3 subsets");
  std::vector<SplitTag> pattern(n_subsets - 2, SplitTag::kKnownKnown);
  if (mode == OpennessMode::kLow) {
    pattern.push_back(SplitTag::kKnownUnknown);
  } else {
    pattern.push_back(SplitTag::kUnknownUnknown);
  }
  pattern.push_back(SplitTag::kUnknownUnknown);
  return pattern;
}

std::vector<ClassSplit> make_split_variants(const ClassVocabulary& vocab,
                                            int n_subsets, OpennessMode mode) {
  vocab.validate();
  const std::vector<SplitTag> pattern = base_tag_pattern(n_subsets, mode);
  const int c = vocab.size();
  if (c < n_subsets)
    throw std::invalid_argument(fmt::format(
        "{} classes cannot fill {} non-empty subsets", c, n_subsets));

  std::vector<std::vector<ClassId>> subsets(n_subsets);
  const int base = c / n_subsets;
  const int extra = c % n_subsets;
  int next = 0;
  for (int s = 0; s < n_subsets; ++s) {
    const int size = base + (s < extra ? 1 : 0);
    for (int k = 0; k < size; ++k) subsets[s].push_back(vocab.classes[next++]);
  }

  std::vector<ClassSplit> variants;
  for (int v = 0; v < n_subsets; ++v) {
    ClassSplit split;
    split.variant_id = v + 1;
    split.mode = mode;
    split.subsets = subsets;
    split.assignment.resize(n_subsets);
    for (int s = 0; s < n_subsets; ++s)
      split.assignment[s] = pattern[((s - v) % n_subsets + n_subsets) % n_subsets];
    split.validate();
    variants.push_back(std::move(split));
  }
  return variants;
}

std::int64_t virtual_source_id(Pool pool, std::int64_t soundscape_id,
                               int event_index) {
  return ((static_cast<std::int64_t>(pool) + 1) << 40) | (soundscape_id << 3) |
         event_index;
}

int scaled_min_examples(int n_soundscapes) {
  return static_cast<int>(std::ceil(200.0 * n_soundscapes / 200000.0));
}

namespace {

// Largest-remainder apportionment of `total` slots by weight, on top of a
// per-class floor.
std::vector<int> apportion(const std::vector<double>& weights, int total, int floor_count) {
  const int n = static_cast<int>(weights.size());
  std::vector<int> counts(n, floor_count);
  const int rest = total - n * floor_count;
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int k = 0; k < n; ++k) {
    const double share = rest * weights[k];
    const int whole = static_cast<int>(std::floor(share));
    counts[k] += whole;
    assigned += whole;
    remainders.emplace_back(share - whole, k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; i < rest - assigned; ++i) ++counts[remainders[i % n].second];
  return counts;
}

}  // namespace

std::vector<SoundscapeSpec> sample_soundscape_specs(
    const ClassSplit& split, const ClassVocabulary& vocab, int n, Pool pool,
    std::uint64_t seed, const SamplingOptions& options) {
  split.validate();
  vocab.validate();
  if (n < 1) throw std::invalid_argument("need at least one soundscape");
  if (options.max_polyphony < 1) throw std::invalid_argument("max_polyphony must be >= 1");

  const bool training_pool = pool == Pool::kTrain || pool == Pool::kVal;
  const std::vector<ClassId> pool_classes =
      training_pool ? split.known_classes() : split.all_classes();

  std::vector<double> weights;
  double total_weight = 0.0;
  for (ClassId c : pool_classes) {
    weights.push_back(vocab.weights.at(c));
    total_weight += weights.back();
  }
  for (double& w : weights) w /= total_weight;

  const std::uint64_t pool_stream = stream_id("soundscapes") + static_cast<std::uint64_t>(pool);
  Rng rng(derive_seed(seed, pool_stream));

  std::vector<int> polyphony(n);
  int slots = 0;
  for (int& m : polyphony) {
    m = uniform_int(rng, 1, options.max_polyphony);
    slots += m;
  }
  const int n_classes = static_cast<int>(pool_classes.size());
  int min_examples = options.min_examples_per_class;
  if (!options.strict_minimum) min_examples = std::min(min_examples, slots / n_classes);
  if (slots < n_classes * min_examples)
    throw std::invalid_argument(fmt::format(
        "{} soundscapes give {} event slots, fewer than {} classes x {} minimum",
        n, slots, n_classes, min_examples));

  const std::vector<int> counts = apportion(weights, slots, min_examples);
  std::vector<ClassId> bag;
  bag.reserve(slots);
  for (int k = 0; k < n_classes; ++k) bag.insert(bag.end(), counts[k], pool_classes[k]);
  for (int i = slots - 1; i > 0; --i) std::swap(bag[i], bag[uniform_int(rng, 0, i)]);

  std::vector<SoundscapeSpec> specs(n);
  int cursor = 0;
  for (int i = 0; i < n; ++i) {
    SoundscapeSpec& spec = specs[i];
    spec.id = i;
    spec.duration = options.soundscape_duration;
    Rng event_rng(derive_seed(seed, pool_stream, static_cast<std::uint64_t>(i) + 1));
    for (int e = 0; e < polyphony[i]; ++e) {
      EventSpec ev;
      ev.class_id = bag[cursor++];
      ev.duration = uniform(event_rng, options.min_event_duration, options.max_event_duration);
      const double latest = std::min(options.max_onset, spec.duration - ev.duration);
      ev.onset = uniform(event_rng, 0.0, latest);
      ev.pitch_shift = uniform(event_rng, -options.max_pitch_shift, options.max_pitch_shift);
      ev.time_stretch = uniform(event_rng, options.min_time_stretch, options.max_time_stretch);
      spec.events.push_back(ev);
    }
    std::stable_sort(spec.events.begin(), spec.events.end(),
                     [](const EventSpec& a, const EventSpec& b) { return a.onset < b.onset; });
  }
  return specs;
}

double overlap_length(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

std::vector<ClipSpec> window_clips(const SoundscapeSpec& spec,
                                   std::int64_t first_clip_id, double window) {
  std::vector<ClipSpec> clips;
  clips.reserve(spec.events.size());
  for (std::size_t i = 0; i < spec.events.size(); ++i) {
    const EventSpec& anchor = spec.events[i];
    double start = anchor.onset + 0.5 * anchor.duration - 0.5 * window;
    start = std::clamp(start, 0.0, std::max(0.0, spec.duration - window));

    ClipSpec clip;
    clip.id = first_clip_id + static_cast<std::int64_t>(i);
    clip.soundscape_id = spec.id;
    clip.start = start;
    clip.end = start + window;
    for (std::size_t j = 0; j < spec.events.size(); ++j) {
      const double ov = overlap_length(clip.start, clip.end, spec.events[j].onset,
                                       spec.events[j].end());
      if (ov > 0.0) {
        clip.event_indices.push_back(static_cast<int>(j));
        clip.overlaps.push_back(ov);
        clip.labels.push_back(spec.events[j].class_id);
      }
    }
    std::sort(clip.labels.begin(), clip.labels.end());
    clip.labels.erase(std::unique(clip.labels.begin(), clip.labels.end()), clip.labels.end());
    clip.polyphony = static_cast<int>(clip.event_indices.size());
    clips.push_back(std::move(clip));
  }
  return clips;
}

nlohmann::json to_json(const SoundscapeSpec& spec) {
  nlohmann::json events = nlohmann::json::array();
  for (const EventSpec& e : spec.events) {
    events.push_back({{"class", e.class_id},
                      {"onset", e.onset},
                      {"duration", e.duration},
                      {"pitch", e.pitch_shift},
                      {"stretch", e.time_stretch}});
  }
  return {{"id", spec.id}, {"events", std::move(events)}};
}

nlohmann::json to_json(const ClipSpec& clip) {
  return {{"id", clip.id},
          {"soundscape_id", clip.soundscape_id},
          {"window", {clip.start, clip.end}},
          {"labels", clip.labels},
          {"m", clip.polyphony}};
}

nlohmann::json to_json(const ClassSplit& split) {
  nlohmann::json subsets = nlohmann::json::array();
  for (std::size_t s = 0; s < split.subsets.size(); ++s) {
    subsets.push_back({{"index", s + 1},
                       {"tag", std::string(to_string(split.assignment[s]))},
                       {"classes", split.subsets[s]}});
  }
  const OpennessReport o = split.openness();
  return {{"variant", split.variant_id},
          {"openness_mode", std::string(to_string(split.mode))},
          {"subsets", std::move(subsets)},
          {"known_classes", split.known_classes()},
          {"unknown_classes", split.unknown_classes()},
          {"openness", {{"c_tr", o.c_tr}, {"c_te", o.c_te}, {"o_star", o.o_star}}}};
}

SoundscapeSpec soundscape_from_json(const nlohmann::json& j) {
  SoundscapeSpec spec;
  spec.id = j.at("id").get<std::int64_t>();
  for (const auto& e : j.at("events")) {
    EventSpec ev;
    ev.class_id = e.at("class").get<ClassId>();
    ev.onset = e.at("onset").get<double>();
    ev.duration = e.at("duration").get<double>();
    ev.pitch_shift = e.at("pitch").get<double>();
    ev.time_stretch = e.at("stretch").get<double>();
    spec.events.push_back(ev);
  }
  return spec;
}

ClipSpec clip_from_json(const nlohmann::json& j) {
  ClipSpec clip;
  clip.id = j.at("id").get<std::int64_t>();
  clip.soundscape_id = j.at("soundscape_id").get<std::int64_t>();
  clip.start = j.at("window").at(0).get<double>();
  clip.end = j.at("window").at(1).get<double>();
  clip.labels = j.at("labels").get<LabelSet>();
  clip.polyphony = j.at("m").get<int>();
  return clip;
}

ClassSplit split_from_json(const nlohmann::json& j) {
  ClassSplit split;
  split.variant_id = j.at("variant").get<int>();
  split.mode = parse_openness_mode(j.at("openness_mode").get<std::string>());
  for (const auto& s : j.at("subsets")) {
    split.subsets.push_back(s.at("classes").get<std::vector<ClassId>>());
    const std::string tag = s.at("tag").get<std::string>();
    if (tag == "KK") split.assignment.push_back(SplitTag::kKnownKnown);
    else if (tag == "KU") split.assignment.push_back(SplitTag::kKnownUnknown);
    else if (tag == "UU") split.assignment.push_back(SplitTag::kUnknownUnknown);
    else throw ConfigError("unknown split tag '" + tag + "'");
  }
  split.validate();
  return split;
}

}  // namespace mlos
