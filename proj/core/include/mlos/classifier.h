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

#ifndef MLOS_CLASSIFIER_H_
#define MLOS_CLASSIFIER_H_

// Dense classification head and its three training regimes: multi-label
// (binary cross-entropy), multi-class (categorical cross-entropy) and
// permutation-invariant multi-class over per-source inputs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mlos/common.h"

namespace mlos {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Hidden layers use a rectifier; the output layer is linear.
struct MlpParams {
  std::vector<DenseLayer> layers;

  // `sizes` = {input, hidden..., output}. Uniform fan-in scaled weights,
  // zero biases.
  static MlpParams init(std::span<const int> sizes, std::uint64_t seed);
  static MlpParams zeros_like(const MlpParams& shape);

  int input_dim() const;
  int output_dim() const;
  std::size_t parameter_count() const;
  // Shapes chain and every entry is finite.
  void validate() const;
};

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x);
// Column-per-example batch version.
Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs);

Eigen::VectorXd sigmoid(const Eigen::VectorXd& v);
Eigen::VectorXd softmax(const Eigen::VectorXd& v);
double log_sum_exp(const Eigen::VectorXd& v);

// Mean over outputs of the logit-form binary cross-entropy.
double bce_loss(const Eigen::VectorXd& logits, const Eigen::VectorXd& targets);
double ce_loss(const Eigen::VectorXd& logits, int target);

inline constexpr int kMaxPitSources = 4;

struct PitResult {
  double loss = 0.0;
  // assignment[i] is the source row matched with labels[i].
  std::vector<int> assignment;
};

// Exhaustive search over the m! matchings of per-source logits (one row per
// source) to labels. Ties go to the lexicographically smallest assignment.
PitResult pit_loss(const Eigen::MatrixXd& source_logits, std::span<const int> labels);

enum class LossKind { kBce, kCe, kPit };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

// One training example. `inputs` has one column per input vector: a single
// column for bce/ce, m columns (one per source) for pit. `targets` holds the
// positive output indices (bce), the class index (ce) or the m labels (pit).
struct Example {
  Eigen::MatrixXd inputs;
  std::vector<int> targets;
};

struct LossAndGradient {
  double loss = 0.0;  // mean per-example loss
  MlpParams gradient;
};

// Reverse-mode gradient of the mean example loss. For pit the gradient flows
// through each example's best assignment.
LossAndGradient compute_gradients(const MlpParams& params, std::span<const Example> batch,
                                  LossKind kind);
double evaluate_loss(const MlpParams& params, std::span<const Example> examples, LossKind kind);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 128;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kBce;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<int> hidden = {64, 64};

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct Checkpoint {
  MlpParams params;
  int epoch = 0;         // 1-based epoch the params come from
  double val_loss = 0.0;
  std::vector<EpochLog> history;
};

// Adam mini-batch training with early stopping on validation loss. Returns
// the parameters of the best validation epoch.
Checkpoint train(const TrainConfig& config, int input_dim, int output_dim,
                 std::span<const Example> train_set, std::span<const Example> val_set);

// Maps each distinct training label set to a combination class.
class ComboVocabulary {
 public:
  static ComboVocabulary build(std::span<const LabelSet> train_sets);

  // Canonicalizes (sorts, dedups) before lookup; nullopt for unseen sets.
  std::optional<int> encode(LabelSet set) const;
  const LabelSet& decode(int combo_id) const;
  int size() const { return static_cast<int>(combos_.size()); }

  nlohmann::json to_json() const;
  static ComboVocabulary from_json(const nlohmann::json& j);

 private:
  std::vector<LabelSet> combos_;
  std::map<LabelSet, int> index_;
};

// Output indices of the m largest logits, ties to the lower index; returned
// ascending.
LabelSet predict_topm(const Eigen::VectorXd& logits, int m);
// {j : logits[j] > threshold}
LabelSet predict_threshold(const Eigen::VectorXd& logits, double threshold);
int argmax(const Eigen::VectorXd& v);

void save_checkpoint(const std::filesystem::path& bin_path, const Checkpoint& checkpoint,
                     const nlohmann::json& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& bin_path,
                           nlohmann::json* metadata = nullptr);

}  // namespace mlos

#endif  // MLOS_CLASSIFIER_H_
