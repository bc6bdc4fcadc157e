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

#ifndef MLOS_PIPELINE_H_
#define MLOS_PIPELINE_H_

// Glue between rendered datasets and the five baseline systems: how each
// system builds its training examples, what it feeds the classifier at test
// time, and how its outputs turn into open-set decisions and tag predictions.

#include <array>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mlos/classifier.h"
#include "mlos/common.h"
#include "mlos/openset.h"
#include "mlos/synth_features.h"

namespace mlos {

enum class ModelKind {
  kMultiLabel,        // mixture in, sigmoid outputs, BCE
  kEstimatesPit,      // pruned source estimates in, softmax, PIT
  kOraclePit,         // oracle sources in, softmax, PIT
  kCombinatorial,     // mixture in, one class per label combination, CE
  kOracleMultiClass,  // oracle sources in, softmax, CE with true matching
};

// Row order of the published result tables.
inline constexpr std::array<ModelKind, 5> kAllModels = {
    ModelKind::kMultiLabel, ModelKind::kEstimatesPit, ModelKind::kOraclePit,
    ModelKind::kCombinatorial, ModelKind::kOracleMultiClass};

std::string_view model_name(ModelKind kind);
std::string_view model_display_name(ModelKind kind);
ModelKind parse_model(std::string_view name);

LossKind loss_for(ModelKind kind);
bool is_per_source(ModelKind kind);
// Systems whose OpenMax column is populated in the unknown-detection table.
bool has_openmax_row(ModelKind kind);

// Maps training-visible class IDs onto output units.
class ClassIndex {
 public:
  ClassIndex() = default;
  explicit ClassIndex(std::vector<ClassId> known);

  int size() const { return static_cast<int>(known_.size()); }
  int unit_of(ClassId id) const;  // throws for unknown classes
  ClassId class_of(int unit) const { return known_.at(unit); }
  const std::vector<ClassId>& classes() const { return known_; }

 private:
  std::vector<ClassId> known_;
  std::map<ClassId, int> unit_;
};

struct TrainedModel {
  ModelKind kind = ModelKind::kMultiLabel;
  MlpParams params;
  ClassIndex classes;
  std::optional<ComboVocabulary> combos;

  int output_units() const { return params.output_dim(); }
};

// Classifier inputs of one clip: the mixture, or one column per source.
Eigen::MatrixXd clip_inputs(ModelKind kind, const ClipFeatures& clip);

struct ExampleSet {
  std::vector<Example> examples;
  std::size_t skipped = 0;  // clips with combinations outside the vocabulary
};

ExampleSet make_examples(ModelKind kind, const FeatureDataset& data, const ClassIndex& classes,
                         const ComboVocabulary* combos);

// Logits per clip: one column per classifier input.
std::vector<Eigen::MatrixXd> infer(const TrainedModel& model, const FeatureDataset& data);

// Activations of the qualifying training examples per output unit, used for
// MAV and tail fitting.
ClassActivations collect_activations(const TrainedModel& model, const FeatureDataset& data,
                                     const std::vector<Eigen::MatrixXd>& logits);

// Probabilities of one input column (sigmoid or softmax per model).
Eigen::VectorXd output_probabilities(ModelKind kind, const Eigen::VectorXd& logits);

int msp_decision(ModelKind kind, const Eigen::MatrixXd& logits, double delta);
int openmax_decision(ModelKind kind, const Eigen::MatrixXd& logits,
                     std::span<const WeibullTailModel> models, const OpenMaxConfig& config);

// Known-class tag prediction with oracle cardinality, as class IDs.
LabelSet predict_labels(const TrainedModel& model, const ClipFeatures& clip,
                        const Eigen::MatrixXd& logits);
// Per-class scores over the training-visible classes (for mAP).
Eigen::VectorXd class_scores(const TrainedModel& model, const Eigen::MatrixXd& logits);

}  // namespace mlos

#endif  // MLOS_PIPELINE_H_
