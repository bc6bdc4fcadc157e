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

#ifndef MLOS_EXPERIMENT_H_
#define MLOS_EXPERIMENT_H_

// End-to-end experiment runner: plan -> synth -> train -> calibrate -> tune ->
// evaluate -> report, persisted under one run directory with a manifest that
// makes every stage idempotent.
//
// Layout of a run directory:
//
//   config.json, manifest.json
//   plan/openness.json
//   variant_K/plan/split.json, soundscapes_<pool>.jsonl, clips_<pool>.jsonl
//   variant_K/synth/prototypes.bin, <pool>.bin          (+ .json sidecars)
//   variant_K/train/<model>.bin                         (+ .json sidecar)
//   variant_K/calibrate/<model>.bin                     (+ .json sidecar)
//   variant_K/tune/<model>.json, <model>_{msp,openmax}_trials.csv
//   variant_K/evaluate/<model>.json
//   report/table2.txt, report/table3.txt, report/report.json

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlos/classifier.h"
#include "mlos/common.h"
#include "mlos/dataset_plan.h"
#include "mlos/pipeline.h"
#include "mlos/synth_features.h"

namespace mlos {

struct ExperimentConfig {
  std::string output_dir = "runs/default";
  std::uint64_t seed = 0;  // variant K uses seed + K - 1

  // vocabulary / split
  int n_classes = 89;
  std::string weighting = "uniform";  // or "power_law"
  double power_law_exponent = 1.0;
  int n_subsets = 5;
  OpennessMode openness = OpennessMode::kHigh;

  // dataset sizes in soundscapes
  int train_soundscapes = 4000;
  int val_soundscapes = 600;
  int test_soundscapes = 3000;
  double tuning_fraction = 0.2;
  int min_examples_per_class = 0;  // 0: ceil(200 * n / 200000)
  int max_polyphony = 4;

  // feature generator
  int feature_dim = 64;
  double min_separation = 0.5;
  double jitter_scale = 0.3;
  double min_energy = 0.5;
  double max_energy = 2.0;
  double mixture_noise = 0.02;

  // separation stand-in
  double beta = 0.25;
  double gamma = 0.1;
  double energy_floor = 0.8;

  // classifier
  std::string model_preset = "desk";  // "desk" uses `hidden`; "wide" is 5 x 1024
  std::vector<int> hidden = {64, 64};
  double learning_rate = 1e-3;
  int batch_size = 128;
  int max_epochs = 60;
  int patience = 10;

  // tuning
  int tuner_budget = 100;
  int tau_min = 5;
  int tau_max = 200;
  int default_tau = 20;
  bool multilabel_openmax = true;  // experimental path, not tabulated

  std::vector<ModelKind> models = {kAllModels.begin(), kAllModels.end()};

  nlohmann::json to_json() const;
  // Unknown keys and ill-typed values raise ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  // Reads `path` (if non-empty) and applies `key.path=value` overrides.
  static ExperimentConfig load(const std::filesystem::path& path,
                               const std::vector<std::string>& overrides);

  void validate() const;
  std::uint64_t variant_seed(int variant_id) const;
  std::vector<int> hidden_layers() const;
  ClassVocabulary vocabulary() const;
  SynthOptions synth_options() const;
  TrainConfig train_config(ModelKind kind, std::uint64_t seed) const;
  int pool_size(Pool pool) const;
  // Hex FNV-1a of the canonical config document.
  std::string hash() const;
};

// Applies one `a.b.c=value` assignment; value is parsed as JSON, falling back
// to a plain string.
void apply_override(nlohmann::json& doc, std::string_view assignment);

enum class Stage { kPlan, kSynth, kTrain, kCalibrate, kTune, kEvaluate, kReport };

inline constexpr std::array<Stage, 7> kAllStages = {Stage::kPlan,      Stage::kSynth, Stage::kTrain,
                                                    Stage::kCalibrate, Stage::kTune,  Stage::kEvaluate,
                                                    Stage::kReport};

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);

struct StageFilter {
  std::optional<int> variant;
  std::optional<ModelKind> model;
};

struct StageResult {
  int ran = 0;
  int skipped = 0;
};

class Experiment {
 public:
  explicit Experiment(ExperimentConfig config, std::ostream* log = nullptr);

  StageResult run_stage(Stage stage, const StageFilter& filter = {}, bool force = false);
  StageResult run_all(const StageFilter& filter = {}, bool force = false);

  const ExperimentConfig& config() const { return config_; }
  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path variant_dir(int variant_id) const;
  nlohmann::json manifest() const;

 private:
  struct Unit;

  std::vector<Unit> units_for(Stage stage, const StageFilter& filter) const;
  std::vector<std::string> run_unit(const Unit& unit);

  std::vector<std::string> plan(int v);
  std::vector<std::string> synth(int v);
  std::vector<std::string> train_model(int v, ModelKind kind);
  std::vector<std::string> calibrate(int v, ModelKind kind);
  std::vector<std::string> tune_model(int v, ModelKind kind);
  std::vector<std::string> evaluate(int v, ModelKind kind);
  std::vector<std::string> report();

  bool calibrates(ModelKind kind) const;
  TrainedModel load_model(int v, ModelKind kind) const;
  ClassSplit load_split(int v) const;
  FeatureDataset load_pool(int v, Pool pool) const;
  void require(const std::filesystem::path& path, Stage upstream) const;
  std::string rel(const std::filesystem::path& p) const;
  void say(const std::string& line) const;

  ExperimentConfig config_;
  std::filesystem::path root_;
  std::ostream* log_;
};

// Aligned-text tables in the layout of the published result tables.
std::string render_unknown_table(const nlohmann::json& report);
std::string render_closed_set_table(const nlohmann::json& report);

}  // namespace mlos

#endif  // MLOS_EXPERIMENT_H_
