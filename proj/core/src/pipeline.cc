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

#include "mlos/pipeline.h"

#include <algorithm>

#include <fmt/format.h>

namespace mlos {

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kMultiLabel: return "multi_label";
    case ModelKind::kEstimatesPit: return "estimates_pit";
    case ModelKind::kOraclePit: return "oracle_pit";
    case ModelKind::kCombinatorial: return "combinatorial";
    case ModelKind::kOracleMultiClass: return "oracle_mc";
  }
  return "?";
}

std::string_view model_display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kMultiLabel: return "Multi-label";
    case ModelKind::kEstimatesPit: return "Source estimates PIT";
    case ModelKind::kOraclePit: return "Oracle sources PIT";
    case ModelKind::kCombinatorial: return "Combinatorial multi-class";
    case ModelKind::kOracleMultiClass: return "Oracle sources multi-class";
  }
  return "?";
}

ModelKind parse_model(std::string_view name) {
  for (ModelKind k : kAllModels)
    if (model_name(k) == name) return k;
  throw ConfigError(fmt::format(
      "unknown model '{}' (expected multi_label, estimates_pit, oracle_pit, combinatorial or oracle_mc)",
      name));
}

LossKind loss_for(ModelKind kind) {
  switch (kind) {
    case ModelKind::kMultiLabel: return LossKind::kBce;
    case ModelKind::kEstimatesPit:
    case ModelKind::kOraclePit: return LossKind::kPit;
    case ModelKind::kCombinatorial:
    case ModelKind::kOracleMultiClass: return LossKind::kCe;
  }
  return LossKind::kCe;
}

bool is_per_source(ModelKind kind) {
  return kind == ModelKind::kEstimatesPit || kind == ModelKind::kOraclePit ||
         kind == ModelKind::kOracleMultiClass;
}

bool has_openmax_row(ModelKind kind) {
  return kind == ModelKind::kOraclePit || kind == ModelKind::kOracleMultiClass;
}

ClassIndex::ClassIndex(std::vector<ClassId> known) : known_(std::move(known)) {
  std::sort(known_.begin(), known_.end());
  for (int u = 0; u < size(); ++u) unit_.emplace(known_[u], u);
}

int ClassIndex::unit_of(ClassId id) const {
  const auto it = unit_.find(id);
  if (it == unit_.end())
    throw std::invalid_argument(fmt::format("class {} has no output unit", id));
  return it->second;
}

Eigen::MatrixXd clip_inputs(ModelKind kind, const ClipFeatures& clip) {
  switch (kind) {
    case ModelKind::kMultiLabel:
    case ModelKind::kCombinatorial:
      return clip.mixture;
    case ModelKind::kOraclePit:
    case ModelKind::kOracleMultiClass: {
      Eigen::MatrixXd x(clip.mixture.size(), static_cast<Eigen::Index>(clip.sources.size()));
      for (std::size_t s = 0; s < clip.sources.size(); ++s)
        x.col(static_cast<Eigen::Index>(s)) = clip.sources[s].vector;
      return x;
    }
    case ModelKind::kEstimatesPit: {
      const std::vector<int> keep = oracle_prune(clip.estimates, clip.polyphony);
      Eigen::MatrixXd x(clip.mixture.size(), static_cast<Eigen::Index>(keep.size()));
      for (std::size_t s = 0; s < keep.size(); ++s)
        x.col(static_cast<Eigen::Index>(s)) = clip.estimates[keep[s]].vector;
      return x;
    }
  }
  return {};
}

ExampleSet make_examples(ModelKind kind, const FeatureDataset& data, const ClassIndex& classes,
                         const ComboVocabulary* combos) {
  ExampleSet out;
  for (const ClipFeatures& clip : data.clips) {
    switch (kind) {
      case ModelKind::kMultiLabel: {
        Example ex{clip.mixture, {}};
        for (ClassId c : clip.labels) ex.targets.push_back(classes.unit_of(c));
        out.examples.push_back(std::move(ex));
        break;
      }
      case ModelKind::kCombinatorial: {
        if (!combos) throw std::invalid_argument("combinatorial examples need a combination vocabulary");
        const auto id = combos->encode(clip.labels);
        if (!id) {
          ++out.skipped;
          break;
        }
        out.examples.push_back({clip.mixture, {*id}});
        break;
      }
      case ModelKind::kEstimatesPit:
      case ModelKind::kOraclePit: {
        Example ex{clip_inputs(kind, clip), {}};
        for (const auto& s : clip.sources) ex.targets.push_back(classes.unit_of(s.class_id));
        out.examples.push_back(std::move(ex));
        break;
      }
      case ModelKind::kOracleMultiClass:
        for (const auto& s : clip.sources)
          out.examples.push_back({s.vector, {classes.unit_of(s.class_id)}});
        break;
    }
  }
  return out;
}

std::vector<Eigen::MatrixXd> infer(const TrainedModel& model, const FeatureDataset& data) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(data.clips.size());
  for (const ClipFeatures& clip : data.clips)
    out.push_back(mlp_forward_batch(model.params, clip_inputs(model.kind, clip)));
  return out;
}

ClassActivations collect_activations(const TrainedModel& model, const FeatureDataset& data,
                                     const std::vector<Eigen::MatrixXd>& logits) {
  if (model.kind == ModelKind::kCombinatorial)
    throw std::invalid_argument("OpenMax calibration is not defined for the combinatorial model");
  ClassActivations acts(static_cast<std::size_t>(model.output_units()));
  for (std::size_t i = 0; i < data.clips.size(); ++i) {
    const ClipFeatures& clip = data.clips[i];
    const Eigen::MatrixXd& v = logits[i];
    if (model.kind == ModelKind::kMultiLabel) {
      LabelSet truth;
      for (ClassId c : clip.labels) truth.push_back(model.classes.unit_of(c));
      const Eigen::VectorXd z = v.col(0);
      for (int unit : qualifying_multilabel(z, truth, static_cast<int>(truth.size())))
        acts[unit].push_back(z);
      continue;
    }
    std::vector<int> labels;
    for (const auto& s : clip.sources) labels.push_back(model.classes.unit_of(s.class_id));
    // Source s is matched with label `matched[s]`.
    std::vector<int> matched(labels.size());
    if (model.kind == ModelKind::kOracleMultiClass) {
      matched = labels;
    } else {
      const PitResult r = pit_loss(v.transpose(), labels);
      for (std::size_t k = 0; k < labels.size(); ++k) matched[r.assignment[k]] = labels[k];
    }
    for (Eigen::Index s = 0; s < v.cols(); ++s) {
      const Eigen::VectorXd z = v.col(s);
      if (qualifies_multiclass(z, matched[s])) acts[matched[s]].push_back(z);
    }
  }
  return acts;
}

Eigen::VectorXd output_probabilities(ModelKind kind, const Eigen::VectorXd& logits) {
  return kind == ModelKind::kMultiLabel ? sigmoid(logits) : softmax(logits);
}

int msp_decision(ModelKind kind, const Eigen::MatrixXd& logits, double delta) {
  std::vector<Eigen::VectorXd> probs;
  for (Eigen::Index s = 0; s < logits.cols(); ++s)
    probs.push_back(output_probabilities(kind, logits.col(s)));
  if (is_per_source(kind)) return decide_msp_per_source(probs, delta).unknown;
  return decide_msp(probs.front(), delta).unknown;
}

int openmax_decision(ModelKind kind, const Eigen::MatrixXd& logits,
                     std::span<const WeibullTailModel> models, const OpenMaxConfig& config) {
  switch (kind) {
    case ModelKind::kMultiLabel:
      return decide_openmax(logits.col(0), models, config, OutputActivation::kSigmoid).unknown;
    case ModelKind::kCombinatorial:
      throw std::invalid_argument("OpenMax is not defined for the combinatorial model");
    default: {
      std::vector<Eigen::VectorXd> cols;
      for (Eigen::Index s = 0; s < logits.cols(); ++s) cols.push_back(logits.col(s));
      return decide_openmax_per_source(cols, models, config).unknown;
    }
  }
}

LabelSet predict_labels(const TrainedModel& model, const ClipFeatures& clip,
                        const Eigen::MatrixXd& logits) {
  LabelSet out;
  switch (model.kind) {
    case ModelKind::kMultiLabel: {
      const int m = std::min(static_cast<int>(clip.labels.size()), model.classes.size());
      for (int unit : predict_topm(logits.col(0), m)) out.push_back(model.classes.class_of(unit));
      break;
    }
    case ModelKind::kCombinatorial:
      out = model.combos->decode(argmax(logits.col(0)));
      break;
    default:
      for (Eigen::Index s = 0; s < logits.cols(); ++s)
        out.push_back(model.classes.class_of(argmax(logits.col(s))));
      break;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Eigen::VectorXd class_scores(const TrainedModel& model, const Eigen::MatrixXd& logits) {
  const int n = model.classes.size();
  switch (model.kind) {
    case ModelKind::kMultiLabel:
      return sigmoid(logits.col(0));
    case ModelKind::kCombinatorial: {
      const Eigen::VectorXd p = softmax(logits.col(0));
      Eigen::VectorXd scores = Eigen::VectorXd::Zero(n);
      for (int k = 0; k < model.combos->size(); ++k)
        for (ClassId c : model.combos->decode(k)) scores[model.classes.unit_of(c)] += p[k];
      return scores;
    }
    default: {
      Eigen::VectorXd scores = Eigen::VectorXd::Zero(n);
      for (Eigen::Index s = 0; s < logits.cols(); ++s)
        scores = scores.cwiseMax(softmax(logits.col(s)));
      return scores;
    }
  }
}

}  // namespace mlos
