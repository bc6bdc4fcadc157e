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

#include "mlos/classifier.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "mlos/binary_io.h"
#include "mlos/random.h"

namespace mlos {

MlpParams MlpParams::init(std::span<const int> sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw std::invalid_argument("an MLP needs input and output sizes");
  for (int s : sizes)
    if (s < 1) throw std::invalid_argument("layer sizes must be positive");
  Rng rng(seed);
  MlpParams p;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    const double limit = std::sqrt(3.0 / in);
    DenseLayer layer;
    layer.weight.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = uniform(rng, -limit, limit);
    layer.bias = Eigen::VectorXd::Zero(out);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

MlpParams MlpParams::zeros_like(const MlpParams& shape) {
  MlpParams p;
  for (const auto& l : shape.layers)
    p.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  return p;
}

int MlpParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
}

int MlpParams::output_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpParams::validate() const {
  if (layers.empty()) throw std::invalid_argument("MLP has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].bias.size() != layers[l].weight.rows())
      throw std::invalid_argument(fmt::format("layer {} bias does not match weight rows", l));
    if (l > 0 && layers[l].weight.cols() != layers[l - 1].weight.rows())
      throw std::invalid_argument(fmt::format("layer {} input does not chain from layer {}", l, l - 1));
    if (!layers[l].weight.allFinite() || !layers[l].bias.allFinite())
      throw std::invalid_argument(fmt::format("layer {} has non-finite entries", l));
  }
}

Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != params.input_dim())
    throw std::invalid_argument(fmt::format("input has {} rows, network expects {}",
                                            inputs.rows(), params.input_dim()));
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const DenseLayer& layer = params.layers[l];
    Eigen::MatrixXd z = layer.weight * a;
    z.colwise() += layer.bias;
    if (l + 1 < params.layers.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x) {
  return mlp_forward_batch(params, x);
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  });
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  Eigen::VectorXd e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

double bce_loss(const Eigen::VectorXd& logits, const Eigen::VectorXd& targets) {
  if (logits.size() != targets.size() || logits.size() == 0)
    throw std::invalid_argument("bce_loss: logits and targets differ in size");
  double total = 0.0;
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    const double z = logits[j];
    // max(z, 0) - z*y + log(1 + exp(-|z|))
    total += std::max(z, 0.0) - z * targets[j] + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(logits.size());
}

double ce_loss(const Eigen::VectorXd& logits, int target) {
  if (target < 0 || target >= logits.size())
    throw std::invalid_argument(fmt::format("class index {} outside [0, {})", target, logits.size()));
  return log_sum_exp(logits) - logits[target];
}

PitResult pit_loss(const Eigen::MatrixXd& source_logits, std::span<const int> labels) {
  const int m = static_cast<int>(source_logits.rows());
  if (m < 1 || m > kMaxPitSources)
    throw std::invalid_argument(fmt::format("pit_loss supports 1..{} sources, got {}", kMaxPitSources, m));
  if (static_cast<int>(labels.size()) != m)
    throw std::invalid_argument("pit_loss needs one label per source");

  // cost(s, i): loss of source s predicting label i.
  Eigen::MatrixXd cost(m, m);
  for (int s = 0; s < m; ++s) {
    const Eigen::VectorXd row = source_logits.row(s).transpose();
    const double lse = log_sum_exp(row);
    for (int i = 0; i < m; ++i) {
      if (labels[i] < 0 || labels[i] >= row.size())
        throw std::invalid_argument(fmt::format("label {} outside [0, {})", labels[i], row.size()));
      cost(s, i) = lse - row[labels[i]];
    }
  }

  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  PitResult best;
  best.loss = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < m; ++i) total += cost(perm[i], i);
    if (total < best.loss) {
      best.loss = total;
      best.assignment = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kBce: return "bce";
    case LossKind::kCe: return "ce";
    case LossKind::kPit: return "pit";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "bce") return LossKind::kBce;
  if (text == "ce") return LossKind::kCe;
  if (text == "pit") return LossKind::kPit;
  throw ConfigError("unknown loss kind '" + std::string(text) + "'");
}

namespace {

template <typename Get>
Eigen::MatrixXd stack_inputs(std::size_t n, Get&& get, int input_dim) {
  Eigen::Index cols = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = get(i);
    if (ex.inputs.rows() != input_dim)
      throw std::invalid_argument(fmt::format("example has {} input rows, network expects {}",
                                              ex.inputs.rows(), input_dim));
    cols += ex.inputs.cols();
  }
  Eigen::MatrixXd x(input_dim, cols);
  Eigen::Index c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = get(i);
    x.middleCols(c, ex.inputs.cols()) = ex.inputs;
    c += ex.inputs.cols();
  }
  return x;
}

void check_example(const Example& ex, LossKind kind, int n_out) {
  const auto cols = ex.inputs.cols();
  switch (kind) {
    case LossKind::kBce:
      if (cols != 1) throw std::invalid_argument("bce examples take one input column");
      break;
    case LossKind::kCe:
      if (cols != 1 || ex.targets.size() != 1)
        throw std::invalid_argument("ce examples take one input column and one target");
      break;
    case LossKind::kPit:
      if (cols < 1 || cols > kMaxPitSources || static_cast<Eigen::Index>(ex.targets.size()) != cols)
        throw std::invalid_argument("pit examples take 1..4 sources with one label each");
      break;
  }
  for (int t : ex.targets)
    if (t < 0 || t >= n_out)
      throw std::invalid_argument(fmt::format("target {} outside [0, {})", t, n_out));
}

// Adds the loss of one example and, if `delta` is given, writes d(loss)/d(logits)
// (unscaled) into the example's columns.
double example_loss(const Example& ex, LossKind kind, const Eigen::MatrixXd& logits,
                    Eigen::Index col, Eigen::MatrixXd* delta) {
  const auto n_out = logits.rows();
  switch (kind) {
    case LossKind::kBce: {
      Eigen::VectorXd y = Eigen::VectorXd::Zero(n_out);
      for (int t : ex.targets) y[t] = 1.0;
      const Eigen::VectorXd z = logits.col(col);
      if (delta) delta->col(col) = (sigmoid(z) - y) / static_cast<double>(n_out);
      return bce_loss(z, y);
    }
    case LossKind::kCe: {
      const Eigen::VectorXd z = logits.col(col);
      if (delta) {
        delta->col(col) = softmax(z);
        (*delta)(ex.targets[0], col) -= 1.0;
      }
      return ce_loss(z, ex.targets[0]);
    }
    case LossKind::kPit: {
      const auto m = ex.inputs.cols();
      const PitResult r = pit_loss(logits.middleCols(col, m).transpose(), ex.targets);
      if (delta) {
        for (Eigen::Index i = 0; i < m; ++i) {
          const Eigen::Index c = col + r.assignment[i];
          delta->col(c) = softmax(logits.col(c));
          (*delta)(ex.targets[i], c) -= 1.0;
        }
      }
      return r.loss;
    }
  }
  return 0.0;
}

template <typename Get>
LossAndGradient gradients_impl(const MlpParams& params, std::size_t n, Get&& get, LossKind kind) {
  if (n == 0) throw std::invalid_argument("cannot differentiate an empty batch");
  const int n_out = params.output_dim();
  for (std::size_t i = 0; i < n; ++i) check_example(get(i), kind, n_out);

  const std::size_t n_layers = params.layers.size();
  std::vector<Eigen::MatrixXd> acts;  // acts[l] is the input to layer l
  acts.reserve(n_layers + 1);
  acts.push_back(stack_inputs(n, get, params.input_dim()));
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = params.layers[l].weight * acts.back();
    z.colwise() += params.layers[l].bias;
    if (l + 1 < n_layers) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }

  const Eigen::MatrixXd& logits = acts.back();
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  LossAndGradient out;
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = get(i);
    out.loss += example_loss(ex, kind, logits, col, &delta);
    col += ex.inputs.cols();
  }
  const double scale = 1.0 / static_cast<double>(n);
  out.loss *= scale;
  delta *= scale;

  out.gradient = MlpParams::zeros_like(params);
  for (std::size_t l = n_layers; l-- > 0;) {
    out.gradient.layers[l].weight.noalias() = delta * acts[l].transpose();
    out.gradient.layers[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = params.layers[l].weight.transpose() * delta;
      // acts[l] is the rectified output of layer l-1; its derivative is 1 where positive.
      delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

}  // namespace

LossAndGradient compute_gradients(const MlpParams& params, std::span<const Example> batch,
                                  LossKind kind) {
  return gradients_impl(params, batch.size(),
                        [&](std::size_t i) -> const Example& { return batch[i]; }, kind);
}

double evaluate_loss(const MlpParams& params, std::span<const Example> examples, LossKind kind) {
  if (examples.empty()) throw std::invalid_argument("cannot evaluate loss on an empty set");
  constexpr std::size_t kChunk = 512;
  double total = 0.0;
  for (std::size_t start = 0; start < examples.size(); start += kChunk) {
    const auto chunk = examples.subspan(start, std::min(kChunk, examples.size() - start));
    for (const auto& ex : chunk) check_example(ex, kind, params.output_dim());
    const Eigen::MatrixXd x = stack_inputs(
        chunk.size(), [&](std::size_t i) -> const Example& { return chunk[i]; }, params.input_dim());
    const Eigen::MatrixXd logits = mlp_forward_batch(params, x);
    Eigen::Index col = 0;
    for (const auto& ex : chunk) {
      total += example_loss(ex, kind, logits, col, nullptr);
      col += ex.inputs.cols();
    }
  }
  return total / static_cast<double>(examples.size());
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (max_epochs < 1) throw ConfigError("max epochs must be positive");
  if (patience < 1) throw ConfigError("patience must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0))
    throw ConfigError("invalid Adam hyperparameters");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden layer widths must be positive");
}

namespace {

struct AdamState {
  MlpParams m;
  MlpParams v;
  long step = 0;
};

void adam_update(MlpParams& params, const MlpParams& grad, AdamState& state,
                 const TrainConfig& cfg) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto apply = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    p.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    apply(params.layers[l].weight, grad.layers[l].weight, state.m.layers[l].weight,
          state.v.layers[l].weight);
    apply(params.layers[l].bias, grad.layers[l].bias, state.m.layers[l].bias,
          state.v.layers[l].bias);
  }
}

}  // namespace

Checkpoint train(const TrainConfig& config, int input_dim, int output_dim,
                 std::span<const Example> train_set, std::span<const Example> val_set) {
  config.validate();
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("training needs non-empty train and validation sets");

  std::vector<int> sizes = {input_dim};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(output_dim);
  MlpParams params = MlpParams::init(sizes, derive_seed(config.seed, stream_id("init")));
  AdamState adam{MlpParams::zeros_like(params), MlpParams::zeros_like(params), 0};

  Checkpoint best;
  best.val_loss = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  int since_best = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, stream_id("shuffle"), static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i)))]);

    double epoch_loss = 0.0;
    const auto bs = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0, b = 0; start < order.size(); start += bs, ++b) {
      const std::size_t n = std::min(bs, order.size() - start);
      LossAndGradient lg = gradients_impl(
          params, n,
          [&](std::size_t i) -> const Example& { return train_set[order[start + i]]; },
          config.loss);
      if (!std::isfinite(lg.loss))
        throw std::runtime_error(fmt::format(
            "training diverged: non-finite loss {} at epoch {}, batch {} (lr {})", lg.loss, epoch,
            b, config.learning_rate));
      epoch_loss += lg.loss * static_cast<double>(n);
      adam_update(params, lg.gradient, adam, config);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(order.size());
    log.val_loss = evaluate_loss(params, val_set, config.loss);
    if (!std::isfinite(log.val_loss))
      throw std::runtime_error(fmt::format("training diverged: non-finite validation loss at epoch {}", epoch));
    best.history.push_back(log);

    if (log.val_loss < best.val_loss) {
      best.params = params;
      best.epoch = epoch;
      best.val_loss = log.val_loss;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return best;
}

ComboVocabulary ComboVocabulary::build(std::span<const LabelSet> train_sets) {
  if (train_sets.empty()) throw std::invalid_argument("combination vocabulary needs training sets");
  ComboVocabulary vocab;
  for (LabelSet s : train_sets) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    vocab.index_.emplace(std::move(s), 0);
  }
  for (auto& [set, id] : vocab.index_) {
    id = static_cast<int>(vocab.combos_.size());
    vocab.combos_.push_back(set);
  }
  return vocab;
}

std::optional<int> ComboVocabulary::encode(LabelSet set) const {
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
  const auto it = index_.find(set);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const LabelSet& ComboVocabulary::decode(int combo_id) const {
  if (combo_id < 0 || combo_id >= size())
    throw std::out_of_range(fmt::format("combination ID {} outside [0, {})", combo_id, size()));
  return combos_[combo_id];
}

nlohmann::json ComboVocabulary::to_json() const { return combos_; }

ComboVocabulary ComboVocabulary::from_json(const nlohmann::json& j) {
  const auto sets = j.get<std::vector<LabelSet>>();
  ComboVocabulary v = build(sets);
  if (v.size() != static_cast<int>(sets.size()))
    throw std::runtime_error("stored combination vocabulary has duplicate entries");
  return v;
}

LabelSet predict_topm(const Eigen::VectorXd& logits, int m) {
  const int n = static_cast<int>(logits.size());
  if (m < 0 || m > n) throw std::invalid_argument(fmt::format("top-{} of {} logits", m, n));
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return logits[a] > logits[b]; });
  LabelSet out(idx.begin(), idx.begin() + m);
  std::sort(out.begin(), out.end());
  return out;
}

LabelSet predict_threshold(const Eigen::VectorXd& logits, double threshold) {
  LabelSet out;
  for (Eigen::Index j = 0; j < logits.size(); ++j)
    if (logits[j] > threshold) out.push_back(static_cast<int>(j));
  return out;
}

int argmax(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw std::invalid_argument("argmax of an empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < v.size(); ++j)
    if (v[j] > v[best]) best = j;
  return static_cast<int>(best);
}

void save_checkpoint(const std::filesystem::path& bin_path, const Checkpoint& checkpoint,
                     const nlohmann::json& metadata) {
  checkpoint.params.validate();
  FloatTable table;
  table.dim = 1;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : checkpoint.params.layers) {
    nlohmann::json entry = {{"out", layer.weight.rows()},
                            {"in", layer.weight.cols()},
                            {"weight_offset", table.values.size()}};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        table.values.push_back(static_cast<float>(layer.weight(r, c)));
    entry["bias_offset"] = table.values.size();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
      table.values.push_back(static_cast<float>(layer.bias[r]));
    layers.push_back(std::move(entry));
  }
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : checkpoint.history)
    history.push_back({{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"val_loss", h.val_loss}});
  write_table(bin_path, table,
              {{"kind", "checkpoint"},
               {"layers", std::move(layers)},
               {"epoch", checkpoint.epoch},
               {"val_loss", checkpoint.val_loss},
               {"history", std::move(history)},
               {"metadata", metadata}});
}

Checkpoint load_checkpoint(const std::filesystem::path& bin_path, nlohmann::json* metadata) {
  const FloatTable table = read_table(bin_path);
  const nlohmann::json sidecar = read_sidecar(bin_path);
  if (sidecar.at("kind") != "checkpoint")
    throw std::runtime_error(bin_path.string() + " is not a checkpoint");
  Checkpoint cp;
  for (const auto& entry : sidecar.at("layers")) {
    const auto out = entry.at("out").get<Eigen::Index>();
    const auto in = entry.at("in").get<Eigen::Index>();
    auto w = entry.at("weight_offset").get<std::size_t>();
    auto b = entry.at("bias_offset").get<std::size_t>();
    if (b + static_cast<std::size_t>(out) > table.values.size() || w + out * in > table.values.size())
      throw std::runtime_error(bin_path.string() + ": layer extends past the payload");
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = table.values[w++];
    for (Eigen::Index r = 0; r < out; ++r) layer.bias[r] = table.values[b++];
    cp.params.layers.push_back(std::move(layer));
  }
  cp.params.validate();
  cp.epoch = sidecar.at("epoch").get<int>();
  cp.val_loss = sidecar.at("val_loss").get<double>();
  for (const auto& h : sidecar.at("history"))
    cp.history.push_back({h.at("epoch").get<int>(), h.at("train_loss").get<double>(),
                          h.at("val_loss").get<double>()});
  if (metadata) *metadata = sidecar.at("metadata");
  return cp;
}

}  // namespace mlos
