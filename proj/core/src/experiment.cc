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

#include "mlos/experiment.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/ranges.h>

#include <fmt/format.h>

#include "mlos/binary_io.h"
#include "mlos/eval.h"
#include "mlos/openset.h"
#include "mlos/random.h"
#include "mlos/tuner.h"

#ifndef MLOS_VERSION
#define MLOS_VERSION "dev"
#endif

namespace mlos {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

json ExperimentConfig::to_json() const {
  json models_json = json::array();
  for (ModelKind k : models) models_json.push_back(std::string(model_name(k)));
  return {
      {"output_dir", output_dir},
      {"seed", seed},
      {"vocabulary",
       {{"classes", n_classes}, {"weighting", weighting}, {"power_law_exponent", power_law_exponent}}},
      {"split", {{"subsets", n_subsets}, {"openness", std::string(mlos::to_string(openness))}}},
      {"dataset",
       {{"train", train_soundscapes},
        {"val", val_soundscapes},
        {"test", test_soundscapes},
        {"tuning_fraction", tuning_fraction},
        {"min_examples_per_class", min_examples_per_class},
        {"max_polyphony", max_polyphony}}},
      {"features",
       {{"dim", feature_dim},
        {"min_separation", min_separation},
        {"jitter_scale", jitter_scale},
        {"min_energy", min_energy},
        {"max_energy", max_energy},
        {"mixture_noise", mixture_noise}}},
      {"corruption", {{"beta", beta}, {"gamma", gamma}, {"energy_floor", energy_floor}}},
      {"model", {{"preset", model_preset}, {"hidden", hidden}}},
      {"train",
       {{"learning_rate", learning_rate},
        {"batch_size", batch_size},
        {"max_epochs", max_epochs},
        {"patience", patience}}},
      {"tuner",
       {{"budget", tuner_budget},
        {"tau_min", tau_min},
        {"tau_max", tau_max},
        {"default_tau", default_tau},
        {"multilabel_openmax", multilabel_openmax}}},
      {"models", models_json},
  };
}

namespace {

void strict_merge(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError(fmt::format("config section '{}' must be an object", path));
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError(fmt::format("unknown config key '{}'", where));
    json& slot = base[key];
    if (slot.is_object()) {
      strict_merge(slot, value, where);
    } else if (slot.is_number() != value.is_number() || slot.is_string() != value.is_string() ||
               slot.is_boolean() != value.is_boolean() || slot.is_array() != value.is_array()) {
      throw ConfigError(fmt::format("config key '{}' expects {} but got {}", where, slot.type_name(),
                                    value.type_name()));
    } else {
      slot = value;
    }
  }
}

template <typename T>
T field(const json& doc, const char* section, const char* key) {
  const json& v = section ? doc.at(section).at(key) : doc.at(key);
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config key '{}{}{}' has the wrong type: {}", section ? section : "",
                                  section ? "." : "", key, e.what()));
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  json merged = ExperimentConfig{}.to_json();
  strict_merge(merged, doc, "");
  ExperimentConfig c;
  c.output_dir = field<std::string>(merged, nullptr, "output_dir");
  c.seed = field<std::uint64_t>(merged, nullptr, "seed");
  c.n_classes = field<int>(merged, "vocabulary", "classes");
  c.weighting = field<std::string>(merged, "vocabulary", "weighting");
  c.power_law_exponent = field<double>(merged, "vocabulary", "power_law_exponent");
  c.n_subsets = field<int>(merged, "split", "subsets");
  c.openness = parse_openness_mode(field<std::string>(merged, "split", "openness"));
  c.train_soundscapes = field<int>(merged, "dataset", "train");
  c.val_soundscapes = field<int>(merged, "dataset", "val");
  c.test_soundscapes = field<int>(merged, "dataset", "test");
  c.tuning_fraction = field<double>(merged, "dataset", "tuning_fraction");
  c.min_examples_per_class = field<int>(merged, "dataset", "min_examples_per_class");
  c.max_polyphony = field<int>(merged, "dataset", "max_polyphony");
  c.feature_dim = field<int>(merged, "features", "dim");
  c.min_separation = field<double>(merged, "features", "min_separation");
  c.jitter_scale = field<double>(merged, "features", "jitter_scale");
  c.min_energy = field<double>(merged, "features", "min_energy");
  c.max_energy = field<double>(merged, "features", "max_energy");
  c.mixture_noise = field<double>(merged, "features", "mixture_noise");
  c.beta = field<double>(merged, "corruption", "beta");
  c.gamma = field<double>(merged, "corruption", "gamma");
  c.energy_floor = field<double>(merged, "corruption", "energy_floor");
  c.model_preset = field<std::string>(merged, "model", "preset");
  c.hidden = field<std::vector<int>>(merged, "model", "hidden");
  c.learning_rate = field<double>(merged, "train", "learning_rate");
  c.batch_size = field<int>(merged, "train", "batch_size");
  c.max_epochs = field<int>(merged, "train", "max_epochs");
  c.patience = field<int>(merged, "train", "patience");
  c.tuner_budget = field<int>(merged, "tuner", "budget");
  c.tau_min = field<int>(merged, "tuner", "tau_min");
  c.tau_max = field<int>(merged, "tuner", "tau_max");
  c.default_tau = field<int>(merged, "tuner", "default_tau");
  c.multilabel_openmax = field<bool>(merged, "tuner", "multilabel_openmax");
  c.models.clear();
  for (const auto& name : field<std::vector<std::string>>(merged, nullptr, "models"))
    c.models.push_back(parse_model(name));
  c.validate();
  return c;
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError(fmt::format("override '{}' is not of the form key=value", assignment));
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::istringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->is_object()) throw ConfigError(fmt::format("override '{}' descends into a non-object", key));
    node = &(*node)[path[i]];
    if (node->is_null()) *node = json::object();
  }
  (*node)[path.back()] = value;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::string text;
    try {
      text = read_text_file(path);
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("cannot read config {}: {}", path.string(), e.what()));
    }
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(fmt::format("config {} is not valid JSON: {}", path.string(), e.what()));
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return from_json(doc);
}

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  need(!output_dir.empty(), "output_dir must be set");
  need(n_subsets >= 3, "split.subsets must be >= 3");
  need(n_classes >= n_subsets, "vocabulary.classes must be >= split.subsets");
  need(weighting == "uniform" || weighting == "power_law", "vocabulary.weighting must be uniform or power_law");
  need(power_law_exponent >= 0.0, "vocabulary.power_law_exponent must be >= 0");
  need(train_soundscapes >= 1 && val_soundscapes >= 1 && test_soundscapes >= 1, "dataset sizes must be >= 1");
  need(tuning_fraction > 0.0, "dataset.tuning_fraction must be positive");
  need(min_examples_per_class >= 0, "dataset.min_examples_per_class must be >= 0");
  need(max_polyphony >= 1 && max_polyphony <= kMaxPitSources, "dataset.max_polyphony must be in 1..4");
  need(feature_dim >= 2, "features.dim must be >= 2");
  need(min_separation >= 0.0 && min_separation <= 2.0, "features.min_separation must be in [0, 2]");
  need(jitter_scale >= 0.0 && mixture_noise >= 0.0, "feature noise levels must be >= 0");
  need(min_energy > 0.0 && max_energy >= min_energy, "feature energy range must be positive and ordered");
  need(beta >= 0.0 && gamma >= 0.0 && energy_floor > 0.0, "corruption parameters out of range");
  need(model_preset == "desk" || model_preset == "wide", "model.preset must be desk or wide");
  need(learning_rate > 0.0 && batch_size >= 1 && max_epochs >= 1 && patience >= 1, "train settings must be positive");
  need(tuner_budget >= 1, "tuner.budget must be >= 1");
  need(tau_min >= 1 && tau_min <= tau_max, "tuner tau bounds must satisfy 1 <= tau_min <= tau_max");
  need(default_tau >= 1, "tuner.default_tau must be >= 1");
  need(!models.empty(), "at least one model must be listed");
  std::set<ModelKind> unique(models.begin(), models.end());
  need(unique.size() == models.size(), "models are listed twice");
  for (int h : hidden) need(h >= 1, "model.hidden widths must be positive");
}

std::uint64_t ExperimentConfig::variant_seed(int variant_id) const {
  return seed + static_cast<std::uint64_t>(variant_id - 1);
}

std::vector<int> ExperimentConfig::hidden_layers() const {
  if (model_preset == "wide") return std::vector<int>(5, 1024);
  return hidden;
}

ClassVocabulary ExperimentConfig::vocabulary() const {
  return weighting == "power_law" ? ClassVocabulary::power_law(n_classes, power_law_exponent)
                                  : ClassVocabulary::uniform(n_classes);
}

SynthOptions ExperimentConfig::synth_options() const {
  SynthOptions o;
  o.render.min_energy = min_energy;
  o.render.max_energy = max_energy;
  o.corruption.leakage = beta;
  o.corruption.noise = gamma;
  o.corruption.energy_floor = energy_floor;
  o.mixture_noise = mixture_noise;
  return o;
}

TrainConfig ExperimentConfig::train_config(ModelKind kind, std::uint64_t s) const {
  TrainConfig t;
  t.learning_rate = learning_rate;
  t.batch_size = batch_size;
  t.max_epochs = max_epochs;
  t.patience = patience;
  t.seed = s;
  t.loss = loss_for(kind);
  t.hidden = hidden_layers();
  return t;
}

int ExperimentConfig::pool_size(Pool pool) const {
  switch (pool) {
    case Pool::kTrain: return train_soundscapes;
    case Pool::kVal: return val_soundscapes;
    case Pool::kTest: return test_soundscapes;
    case Pool::kTuning:
      return std::max(1, static_cast<int>(std::lround(tuning_fraction * test_soundscapes)));
  }
  return 0;
}

std::string ExperimentConfig::hash() const {
  const std::string text = to_json().dump();
  return fmt::format("{:016x}", fnv1a64(text.data(), text.size()));
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kPlan: return "plan";
    case Stage::kSynth: return "synth";
    case Stage::kTrain: return "train";
    case Stage::kCalibrate: return "calibrate";
    case Stage::kTune: return "tune";
    case Stage::kEvaluate: return "evaluate";
    case Stage::kReport: return "report";
  }
  return "?";
}

Stage parse_stage(std::string_view text) {
  for (Stage s : kAllStages)
    if (to_string(s) == text) return s;
  throw ConfigError(fmt::format("unknown stage '{}'", text));
}

// ---------------------------------------------------------------------------
// Run directory plumbing

namespace {

constexpr std::array<Pool, 4> kPools = {Pool::kTrain, Pool::kVal, Pool::kTest, Pool::kTuning};

class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw std::runtime_error(fmt::format(
          "run directory {} is locked by another writer (remove {} if no run is active)", dir.string(),
          path_.string()));
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

json read_json(const fs::path& p) { return json::parse(read_text_file(p)); }

void write_json(const fs::path& p, const json& j) { write_text_file(p, j.dump(2) + "\n"); }

std::uint64_t model_stream(const char* stage, ModelKind kind) {
  return stream_id(stage) + static_cast<std::uint64_t>(kind);
}

json counts_json(const UnknownDetectionReport& r) {
  return {{"tp", r.counts.tp}, {"tn", r.counts.tn}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"total", r.total}};
}

}  // namespace

struct Experiment::Unit {
  Stage stage;
  int variant = 0;
  std::optional<ModelKind> model;

  std::string key() const {
    std::string k(to_string(stage));
    if (variant > 0) k += fmt::format("/variant_{}", variant);
    if (model) k += "/" + std::string(model_name(*model));
    return k;
  }
};

Experiment::Experiment(ExperimentConfig config, std::ostream* log)
    : config_(std::move(config)), root_(config_.output_dir), log_(log) {
  config_.validate();
}

fs::path Experiment::variant_dir(int variant_id) const {
  return root_ / fmt::format("variant_{}", variant_id);
}

json Experiment::manifest() const {
  const fs::path p = root_ / "manifest.json";
  if (!fs::exists(p)) return json::object();
  return read_json(p);
}

std::string Experiment::rel(const fs::path& p) const { return fs::relative(p, root_).generic_string(); }

void Experiment::say(const std::string& line) const {
  if (log_) *log_ << line << std::endl;
}

void Experiment::require(const fs::path& path, Stage upstream) const {
  if (!fs::exists(path))
    throw MissingArtifactError(
        fmt::format("missing {}; run the '{}' stage first", path.string(), to_string(upstream)),
        std::string(to_string(upstream)));
}

bool Experiment::calibrates(ModelKind kind) const {
  return has_openmax_row(kind) || (kind == ModelKind::kMultiLabel && config_.multilabel_openmax);
}

std::vector<Experiment::Unit> Experiment::units_for(Stage stage, const StageFilter& filter) const {
  if (stage == Stage::kReport) return {Unit{stage, 0, std::nullopt}};
  if (filter.variant && (*filter.variant < 1 || *filter.variant > config_.n_subsets))
    throw ConfigError(fmt::format("variant {} outside 1..{}", *filter.variant, config_.n_subsets));
  if (filter.model &&
      std::find(config_.models.begin(), config_.models.end(), *filter.model) == config_.models.end())
    throw ConfigError(fmt::format("model '{}' is not enabled in this config", model_name(*filter.model)));

  std::vector<int> variants;
  if (filter.variant) variants.push_back(*filter.variant);
  else
    for (int v = 1; v <= config_.n_subsets; ++v) variants.push_back(v);

  std::vector<ModelKind> models;
  for (ModelKind k : kAllModels) {
    const bool enabled = std::find(config_.models.begin(), config_.models.end(), k) != config_.models.end();
    if (enabled && (!filter.model || *filter.model == k)) models.push_back(k);
  }

  std::vector<Unit> units;
  for (int v : variants) {
    if (stage == Stage::kPlan || stage == Stage::kSynth) {
      units.push_back({stage, v, std::nullopt});
      continue;
    }
    for (ModelKind k : models) {
      if (stage == Stage::kCalibrate && !calibrates(k)) continue;
      units.push_back({stage, v, k});
    }
  }
  return units;
}

StageResult Experiment::run_stage(Stage stage, const StageFilter& filter, bool force) {
  const std::vector<Unit> units = units_for(stage, filter);
  RunLock lock(root_);

  const std::string hash = config_.hash();
  const std::string config_text = config_.to_json().dump(2) + "\n";
  const fs::path config_path = root_ / "config.json";
  if (!fs::exists(config_path) || read_text_file(config_path) != config_text)
    write_text_file(config_path, config_text);

  json manifest = this->manifest();
  if (!manifest.contains("units")) manifest["units"] = json::object();

  StageResult result;
  for (const Unit& unit : units) {
    const std::string key = unit.key();
    if (!force && manifest["units"].contains(key)) {
      const json& entry = manifest["units"][key];
      bool fresh = entry.value("config_hash", "") == hash;
      for (const auto& out : entry.value("outputs", json::array()))
        fresh = fresh && fs::exists(root_ / out.get<std::string>());
      if (fresh) {
        ++result.skipped;
        continue;
      }
    }
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::string> outputs = run_unit(unit);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    manifest["version"] = MLOS_VERSION;
    manifest["config_hash"] = hash;
    manifest["config_path"] = "config.json";
    manifest["units"][key] = {{"stage", std::string(to_string(unit.stage))},
                              {"variant", unit.variant},
                              {"model", unit.model ? json(std::string(model_name(*unit.model))) : json()},
                              {"outputs", outputs},
                              {"seconds", seconds},
                              {"config_hash", hash}};
    write_json(root_ / "manifest.json", manifest);
    ++result.ran;
  }
  return result;
}

StageResult Experiment::run_all(const StageFilter& filter, bool force) {
  StageResult total;
  for (Stage s : kAllStages) {
    const StageResult r = run_stage(s, filter, force);
    total.ran += r.ran;
    total.skipped += r.skipped;
  }
  return total;
}

std::vector<std::string> Experiment::run_unit(const Unit& unit) {
  switch (unit.stage) {
    case Stage::kPlan: return plan(unit.variant);
    case Stage::kSynth: return synth(unit.variant);
    case Stage::kTrain: return train_model(unit.variant, *unit.model);
    case Stage::kCalibrate: return calibrate(unit.variant, *unit.model);
    case Stage::kTune: return tune_model(unit.variant, *unit.model);
    case Stage::kEvaluate: return evaluate(unit.variant, *unit.model);
    case Stage::kReport: return report();
  }
  return {};
}

ClassSplit Experiment::load_split(int v) const {
  const fs::path p = variant_dir(v) / "plan" / "split.json";
  require(p, Stage::kPlan);
  return split_from_json(read_json(p));
}

FeatureDataset Experiment::load_pool(int v, Pool pool) const {
  const fs::path p = variant_dir(v) / "synth" / (std::string(to_string(pool)) + ".bin");
  require(p, Stage::kSynth);
  return load_dataset(p);
}

TrainedModel Experiment::load_model(int v, ModelKind kind) const {
  const fs::path p = variant_dir(v) / "train" / (std::string(model_name(kind)) + ".bin");
  require(p, Stage::kTrain);
  json meta;
  Checkpoint cp = load_checkpoint(p, &meta);
  TrainedModel m;
  m.kind = kind;
  m.params = std::move(cp.params);
  m.classes = ClassIndex(meta.at("classes").get<std::vector<ClassId>>());
  if (!meta.at("combos").is_null()) m.combos = ComboVocabulary::from_json(meta.at("combos"));
  return m;
}

// ---------------------------------------------------------------------------
// Stages

std::vector<std::string> Experiment::plan(int v) {
  const ClassVocabulary vocab = config_.vocabulary();
  const std::vector<ClassSplit> splits = make_split_variants(vocab, config_.n_subsets, config_.openness);
  const ClassSplit& split = splits.at(static_cast<std::size_t>(v - 1));
  const fs::path dir = variant_dir(v) / "plan";
  std::vector<std::string> outputs;

  write_json(dir / "split.json", to_json(split));
  outputs.push_back(rel(dir / "split.json"));

  json openness = {{"mode", std::string(to_string(config_.openness))}, {"variants", json::array()}};
  for (const ClassSplit& s : splits) {
    const OpennessReport o = s.openness();
    openness["variants"].push_back(
        {{"variant", s.variant_id}, {"c_tr", o.c_tr}, {"c_te", o.c_te}, {"o_star", o.o_star}});
  }
  write_json(root_ / "plan" / "openness.json", openness);
  outputs.push_back("plan/openness.json");

  const std::uint64_t vs = config_.variant_seed(v);
  std::vector<std::string> sizes;
  for (Pool pool : kPools) {
    const int n = config_.pool_size(pool);
    SamplingOptions opt;
    opt.max_polyphony = config_.max_polyphony;
    opt.min_examples_per_class =
        config_.min_examples_per_class > 0 ? config_.min_examples_per_class : scaled_min_examples(n);
    opt.strict_minimum = config_.min_examples_per_class > 0;
    const auto specs = sample_soundscape_specs(split, vocab, n, pool, derive_seed(vs, stream_id("plan")), opt);

    std::string scapes, clips;
    std::int64_t next_clip = 0;
    std::size_t n_clips = 0;
    for (const SoundscapeSpec& s : specs) {
      scapes += to_json(s).dump() + "\n";
      for (const ClipSpec& c : window_clips(s, next_clip)) {
        clips += to_json(c).dump() + "\n";
        ++n_clips;
      }
      next_clip += static_cast<std::int64_t>(s.events.size());
    }
    const std::string name(to_string(pool));
    write_text_file(dir / ("soundscapes_" + name + ".jsonl"), scapes);
    write_text_file(dir / ("clips_" + name + ".jsonl"), clips);
    outputs.push_back(rel(dir / ("soundscapes_" + name + ".jsonl")));
    outputs.push_back(rel(dir / ("clips_" + name + ".jsonl")));
    sizes.push_back(fmt::format("{} {}/{}", name, n, n_clips));
  }
  const OpennessReport o = split.openness();
  say(fmt::format("[plan] variant {}: O* = {:.4f} (C_tr {}, C_te {}); soundscapes/clips: {}", v, o.o_star,
                  o.c_tr, o.c_te, fmt::join(sizes, ", ")));
  return outputs;
}

std::vector<std::string> Experiment::synth(int v) {
  const fs::path plan_dir = variant_dir(v) / "plan";
  const fs::path dir = variant_dir(v) / "synth";
  const std::uint64_t vs = config_.variant_seed(v);
  std::vector<std::string> outputs;

  const PrototypeBank bank = init_prototypes(config_.n_classes, config_.feature_dim, config_.min_separation,
                                             derive_seed(vs, stream_id("prototypes")), config_.jitter_scale);
  save_prototypes(dir / "prototypes.bin", bank);
  outputs.push_back(rel(dir / "prototypes.bin"));
  outputs.push_back(rel(dir / "prototypes.json"));

  for (Pool pool : kPools) {
    const std::string name(to_string(pool));
    const fs::path specs_path = plan_dir / ("soundscapes_" + name + ".jsonl");
    require(specs_path, Stage::kPlan);
    std::vector<SoundscapeSpec> specs;
    std::istringstream lines(read_text_file(specs_path));
    for (std::string line; std::getline(lines, line);)
      if (!line.empty()) specs.push_back(soundscape_from_json(json::parse(line)));
    const FeatureDataset ds = render_dataset(specs, pool, bank, config_.synth_options(),
                                             derive_seed(vs, stream_id("synth"), static_cast<std::uint64_t>(pool)));
    save_dataset(dir / (name + ".bin"), ds);
    outputs.push_back(rel(dir / (name + ".bin")));
    outputs.push_back(rel(dir / (name + ".json")));
  }
  say(fmt::format("[synth] variant {}: rendered {} pools at dim {}", v, kPools.size(), config_.feature_dim));
  return outputs;
}

std::vector<std::string> Experiment::train_model(int v, ModelKind kind) {
  const ClassSplit split = load_split(v);
  const ClassIndex classes(split.known_classes());
  const FeatureDataset train_ds = load_pool(v, Pool::kTrain);
  const FeatureDataset val_ds = load_pool(v, Pool::kVal);

  std::optional<ComboVocabulary> combos;
  if (kind == ModelKind::kCombinatorial) {
    std::vector<LabelSet> sets;
    for (const auto& c : train_ds.clips) sets.push_back(c.labels);
    combos = ComboVocabulary::build(sets);
  }
  const ComboVocabulary* combo_ptr = combos ? &*combos : nullptr;
  const ExampleSet train_set = make_examples(kind, train_ds, classes, combo_ptr);
  const ExampleSet val_set = make_examples(kind, val_ds, classes, combo_ptr);
  const int units = combos ? combos->size() : classes.size();

  const TrainConfig tc = config_.train_config(kind, derive_seed(config_.variant_seed(v), model_stream("train", kind)));
  const auto t0 = std::chrono::steady_clock::now();
  const Checkpoint cp = train(tc, train_ds.dim, units, train_set.examples, val_set.examples);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const json meta = {{"model", std::string(model_name(kind))},
                     {"loss", std::string(to_string(tc.loss))},
                     {"classes", classes.classes()},
                     {"combos", combos ? combos->to_json() : json()},
                     {"output_units", units},
                     {"hidden", tc.hidden},
                     {"train_examples", train_set.examples.size()},
                     {"val_examples", val_set.examples.size()},
                     {"val_skipped_unseen_combinations", val_set.skipped}};
  const fs::path p = variant_dir(v) / "train" / (std::string(model_name(kind)) + ".bin");
  save_checkpoint(p, cp, meta);
  say(fmt::format("[train] variant {} {:<14} {:>5} units, best epoch {:>3}/{:<3} val loss {:.4f} ({:.1f} s)", v,
                  model_name(kind), units, cp.epoch, cp.history.size(), cp.val_loss, secs));
  return {rel(p), rel(sidecar_path(p))};
}

std::vector<std::string> Experiment::calibrate(int v, ModelKind kind) {
  const TrainedModel model = load_model(v, kind);
  const FeatureDataset train_ds = load_pool(v, Pool::kTrain);
  const ClassActivations acts = collect_activations(model, train_ds, infer(model, train_ds));
  const fs::path dir = variant_dir(v) / "calibrate";
  const std::string name(model_name(kind));
  try {
    const TailCalibration cal = calibrate_tails(acts, config_.tau_min, config_.tau_max);
    const fs::path p = dir / (name + ".bin");
    save_tail_calibration(p, cal, config_.default_tau);
    say(fmt::format("[calibrate] variant {} {}: {} class tails, max tau {}", v, name, cal.n_classes(),
                    cal.max_tau()));
    return {rel(p), rel(sidecar_path(p))};
  } catch (const std::invalid_argument& e) {
    // Too few correctly classified training clips; OpenMax is left out for this model.
    const fs::path p = dir / (name + ".failed.json");
    write_json(p, {{"error", e.what()}});
    say(fmt::format("[calibrate] variant {} {}: skipped ({})", v, name, e.what()));
    return {rel(p)};
  }
}

std::vector<std::string> Experiment::tune_model(int v, ModelKind kind) {
  const ClassSplit split = load_split(v);
  const std::vector<ClassId> unknown = split.unknown_classes();
  const TrainedModel model = load_model(v, kind);
  const FeatureDataset ds = load_pool(v, Pool::kTuning);
  const std::vector<Eigen::MatrixXd> logits = infer(model, ds);
  std::vector<int> truth;
  for (const auto& c : ds.clips) truth.push_back(has_unknown(c.labels, unknown) ? 1 : 0);

  const std::uint64_t vs = config_.variant_seed(v);
  const fs::path dir = variant_dir(v) / "tune";
  const std::string name(model_name(kind));
  std::vector<std::string> outputs;

  const Objective msp_objective = [&](const TrialParams& p) {
    std::vector<int> d;
    for (const auto& z : logits) d.push_back(msp_decision(kind, z, p.delta));
    return unknown_detection_accuracy(d, truth).accuracy;
  };
  const TuneResult msp = tune(msp_objective, SearchSpace::delta_sweep(), config_.tuner_budget,
                              derive_seed(vs, model_stream("tune-msp", kind)));
  write_text_file(dir / (name + "_msp_trials.csv"), trial_log_csv(msp.log));
  outputs.push_back(rel(dir / (name + "_msp_trials.csv")));

  json result = {{"model", name},
                 {"msp", {{"delta", msp.best.delta}, {"objective", msp.best_objective}, {"trial", msp.best_trial}}},
                 {"openmax", json()}};

  if (calibrates(kind)) {
    const fs::path cal_path = variant_dir(v) / "calibrate" / (name + ".bin");
    const fs::path failed = variant_dir(v) / "calibrate" / (name + ".failed.json");
    if (fs::exists(failed)) {
      result["openmax_error"] = read_json(failed).at("error");
    } else {
      require(cal_path, Stage::kCalibrate);
      const TailCalibration cal = load_tail_calibration(cal_path);
      SearchSpace space;
      space.tau_min = std::min(config_.tau_min, cal.max_tau());
      space.tau_max = std::min(config_.tau_max, cal.max_tau());
      space.alpha_min = 1;
      space.alpha_max = model.output_units();
      std::map<int, std::vector<WeibullTailModel>> fitted;
      const Objective om_objective = [&](const TrialParams& p) {
        auto it = fitted.find(p.tau);
        if (it == fitted.end()) it = fitted.emplace(p.tau, fit_openmax_models(cal, p.tau)).first;
        const OpenMaxConfig oc{p.alpha, p.delta, p.tau};
        std::vector<int> d;
        for (const auto& z : logits) d.push_back(openmax_decision(kind, z, it->second, oc));
        return unknown_detection_accuracy(d, truth).accuracy;
      };
      const TuneResult om = tune(om_objective, space, config_.tuner_budget,
                                 derive_seed(vs, model_stream("tune-openmax", kind)));
      write_text_file(dir / (name + "_openmax_trials.csv"), trial_log_csv(om.log));
      outputs.push_back(rel(dir / (name + "_openmax_trials.csv")));
      result["openmax"] = {{"delta", om.best.delta},
                           {"tau", om.best.tau},
                           {"alpha", om.best.alpha},
                           {"objective", om.best_objective},
                           {"trial", om.best_trial}};
    }
  }
  write_json(dir / (name + ".json"), result);
  outputs.push_back(rel(dir / (name + ".json")));
  say(fmt::format("[tune] variant {} {:<14} msp delta {:.3f} acc {:.3f}{}", v, name, msp.best.delta,
                  msp.best_objective,
                  result["openmax"].is_null()
                      ? std::string()
                      : fmt::format("; openmax delta {:.3f} tau {} alpha {} acc {:.3f}",
                                    result["openmax"]["delta"].get<double>(), result["openmax"]["tau"].get<int>(),
                                    result["openmax"]["alpha"].get<int>(),
                                    result["openmax"]["objective"].get<double>())));
  return outputs;
}

std::vector<std::string> Experiment::evaluate(int v, ModelKind kind) {
  const std::string name(model_name(kind));
  const fs::path tune_path = variant_dir(v) / "tune" / (name + ".json");
  require(tune_path, Stage::kTune);
  const json tuned = read_json(tune_path);

  const ClassSplit split = load_split(v);
  const std::vector<ClassId> unknown = split.unknown_classes();
  const TrainedModel model = load_model(v, kind);
  const FeatureDataset ds = load_pool(v, Pool::kTest);
  const std::vector<Eigen::MatrixXd> logits = infer(model, ds);

  std::vector<int> truth, msp_decisions;
  const double delta = tuned.at("msp").at("delta").get<double>();
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    truth.push_back(has_unknown(ds.clips[i].labels, unknown) ? 1 : 0);
    msp_decisions.push_back(msp_decision(kind, logits[i], delta));
  }
  const UnknownDetectionReport msp = unknown_detection_accuracy(msp_decisions, truth);

  json result = {{"model", name},
                 {"variant", v},
                 {"test_clips", ds.clips.size()},
                 {"unknown_rate", static_cast<double>(std::count(truth.begin(), truth.end(), 1)) /
                                      static_cast<double>(truth.size())},
                 {"majority_baseline", majority_baseline(truth)},
                 {"msp", {{"delta", delta}, {"accuracy", msp.accuracy}, {"counts", counts_json(msp)}}},
                 {"openmax", json()},
                 {"openmax_tabulated", has_openmax_row(kind)}};

  if (!tuned.at("openmax").is_null()) {
    const json& t = tuned.at("openmax");
    const OpenMaxConfig oc{t.at("alpha").get<int>(), t.at("delta").get<double>(), t.at("tau").get<int>()};
    const fs::path cal_path = variant_dir(v) / "calibrate" / (name + ".bin");
    require(cal_path, Stage::kCalibrate);
    const auto models = fit_openmax_models(load_tail_calibration(cal_path), oc.tau);
    std::vector<int> d;
    for (const auto& z : logits) d.push_back(openmax_decision(kind, z, models, oc));
    const UnknownDetectionReport om = unknown_detection_accuracy(d, truth);
    result["openmax"] = {{"delta", oc.delta},
                         {"tau", oc.tau},
                         {"alpha", oc.alpha},
                         {"accuracy", om.accuracy},
                         {"counts", counts_json(om)}};
  }

  std::vector<LabelSet> predicted, labels;
  Eigen::MatrixXd scores(static_cast<Eigen::Index>(ds.clips.size()), model.classes.size());
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    predicted.push_back(predict_labels(model, ds.clips[i], logits[i]));
    labels.push_back(ds.clips[i].labels);
    scores.row(static_cast<Eigen::Index>(i)) = class_scores(model, logits[i]).transpose();
  }
  const ClosedSetReport cs = closed_set_report(predicted, labels, scores, model.classes.classes(), unknown);
  result["closed_set"] = {{"micro_f1", cs.micro_f1},
                          {"macro_f1", cs.macro_f1},
                          {"map", cs.map},
                          {"clips_evaluated", cs.clips_evaluated},
                          {"clips_skipped_unknown", cs.clips_skipped_unknown},
                          {"map_excluded_classes", cs.map_excluded}};

  const fs::path p = variant_dir(v) / "evaluate" / (name + ".json");
  write_json(p, result);
  say(fmt::format("[evaluate] variant {} {:<14} msp acc {:.3f}{} | micro {:.3f} macro {:.3f} mAP {:.3f} "
                  "(baseline {:.3f})",
                  v, name, msp.accuracy,
                  result["openmax"].is_null()
                      ? std::string()
                      : fmt::format(" openmax acc {:.3f}", result["openmax"]["accuracy"].get<double>()),
                  cs.micro_f1, cs.macro_f1, cs.map, result["majority_baseline"].get<double>()));
  return {rel(p)};
}

std::vector<std::string> Experiment::report() {
  const int n = config_.n_subsets;
  json report = {{"variants", n}, {"models", json::array()}};
  std::vector<double> baseline;
  bool have_baseline = false;

  for (ModelKind kind : kAllModels) {
    if (std::find(config_.models.begin(), config_.models.end(), kind) == config_.models.end()) continue;
    const std::string name(model_name(kind));
    std::vector<json> evals;
    for (int v = 1; v <= n; ++v) {
      const fs::path p = variant_dir(v) / "evaluate" / (name + ".json");
      if (fs::exists(p)) evals.push_back(read_json(p));
    }
    if (static_cast<int>(evals.size()) != n) {
      if (!evals.empty())
        say(fmt::format("[report] {} evaluated on {} of {} variants; left out", name, evals.size(), n));
      continue;
    }
    std::map<std::string, std::vector<double>> metrics;
    bool openmax_everywhere = true;
    for (const json& e : evals) {
      metrics["msp_accuracy"].push_back(100.0 * e.at("msp").at("accuracy").get<double>());
      if (e.at("openmax").is_null()) openmax_everywhere = false;
      else metrics["openmax_accuracy"].push_back(100.0 * e.at("openmax").at("accuracy").get<double>());
      metrics["micro_f1"].push_back(e.at("closed_set").at("micro_f1").get<double>());
      metrics["macro_f1"].push_back(e.at("closed_set").at("macro_f1").get<double>());
      metrics["map"].push_back(e.at("closed_set").at("map").get<double>());
    }
    if (!openmax_everywhere) metrics.erase("openmax_accuracy");
    if (!have_baseline) {
      for (const json& e : evals) baseline.push_back(100.0 * e.at("majority_baseline").get<double>());
      have_baseline = true;
    }
    json entry = {{"name", name},
                  {"display_name", std::string(model_display_name(kind))},
                  {"openmax_tabulated", has_openmax_row(kind)}};
    for (const auto& [metric, summary] : aggregate_variants(metrics, static_cast<std::size_t>(n)))
      entry[metric] = {{"mean", summary.mean}, {"sd", summary.sd}, {"values", summary.values}};
    if (!entry.contains("openmax_accuracy")) entry["openmax_accuracy"] = json();
    report["models"].push_back(std::move(entry));
  }
  if (report["models"].empty())
    throw MissingArtifactError("no model has evaluation outputs for every variant; run the 'evaluate' stage first",
                               "evaluate");
  const MetricSummary b = summarize(baseline);
  report["majority_baseline"] = {{"mean", b.mean}, {"sd", b.sd}, {"values", b.values}};

  const fs::path dir = root_ / "report";
  write_json(dir / "report.json", report);
  write_text_file(dir / "table2.txt", render_unknown_table(report));
  write_text_file(dir / "table3.txt", render_closed_set_table(report));
  say("[report] wrote " + (dir / "table2.txt").string() + " and table3.txt");
  return {"report/report.json", "report/table2.txt", "report/table3.txt"};
}

// ---------------------------------------------------------------------------
// Tables

namespace {

MetricSummary summary_of(const json& m) {
  MetricSummary s;
  s.mean = m.at("mean").get<double>();
  s.sd = m.at("sd").get<double>();
  return s;
}

}  // namespace

std::string render_unknown_table(const json& report) {
  std::string out = fmt::format("Unknown detection accuracy (%), mean (SD) over {} dataset variants\n\n",
                                report.at("variants").get<int>());
  out += fmt::format("{:<28}{:<14}{}\n", "", "MSP", "Openmax");
  out += std::string(54, '-') + "\n";
  for (const json& m : report.at("models")) {
    const std::string msp = format_mean_sd(summary_of(m.at("msp_accuracy")), 1, 1);
    const bool show = m.at("openmax_tabulated").get<bool>() && !m.at("openmax_accuracy").is_null();
    const std::string om = show ? format_mean_sd(summary_of(m.at("openmax_accuracy")), 1, 1) : "--";
    out += fmt::format("{:<28}{:<14}{}\n", m.at("display_name").get<std::string>(), msp, om);
  }
  out += std::string(54, '-') + "\n";
  if (report.contains("majority_baseline"))
    out += fmt::format("Majority-class baseline: {}\n", format_mean_sd(summary_of(report.at("majority_baseline")), 1, 1));
  return out;
}

std::string render_closed_set_table(const json& report) {
  std::string out = fmt::format("Closed-set classification, mean (SD) over {} dataset variants\n\n",
                                report.at("variants").get<int>());
  out += fmt::format("{:<28}{:<15}{:<15}{}\n", "", "Micro F1", "Macro F1", "mAP");
  out += std::string(70, '-') + "\n";
  for (const json& m : report.at("models")) {
    if (m.at("name") == model_name(ModelKind::kCombinatorial)) continue;
    out += fmt::format("{:<28}{:<15}{:<15}{}\n", m.at("display_name").get<std::string>(),
                       format_mean_sd(summary_of(m.at("micro_f1")), 3, 2),
                       format_mean_sd(summary_of(m.at("macro_f1")), 3, 2),
                       format_mean_sd(summary_of(m.at("map")), 3, 2));
  }
  out += std::string(70, '-') + "\n";
  return out;
}

}  // namespace mlos
