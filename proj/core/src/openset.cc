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

#include "mlos/openset.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "mlos/binary_io.h"
#include "mlos/classifier.h"

namespace mlos {

namespace {

constexpr double kShapeTolerance = 1e-9;
constexpr int kMaxNewtonIterations = 200;

// Profile-likelihood score for the shape on data scaled into (0, 1]. Its root
// is the MLE; it is increasing in k.
struct ShapeScore {
  double value;
  double slope;
};

ShapeScore shape_score(std::span<const double> y, std::span<const double> log_y, double mean_log,
                       double k) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::pow(y[i], k);
    s0 += p;
    s1 += p * log_y[i];
    s2 += p * log_y[i] * log_y[i];
  }
  const double ratio = s1 / s0;
  return {ratio - 1.0 / k - mean_log, s2 / s0 - ratio * ratio + 1.0 / (k * k)};
}

}  // namespace

WeibullFit fit_weibull_tail(std::span<const double> distances, int tau) {
  if (tau < 1) throw std::invalid_argument("tail size must be >= 1");
  if (static_cast<int>(distances.size()) < tau)
    throw std::invalid_argument(
        fmt::format("tail size {} exceeds the {} available distances", tau, distances.size()));

  std::vector<double> tail(distances.begin(), distances.end());
  std::partial_sort(tail.begin(), tail.begin() + tau, tail.end(), std::greater<>());
  tail.resize(tau);
  for (double d : tail)
    if (!(d > 0.0) || !std::isfinite(d))
      throw std::invalid_argument("Weibull tail values must be finite and strictly positive");

  const double top = tail.front();
  if (tail.back() == top) return {kDegenerateWeibullShape, top, true, 0};

  std::vector<double> y(tau), log_y(tau);
  double mean_log = 0.0;
  for (int i = 0; i < tau; ++i) {
    y[i] = tail[i] / top;
    log_y[i] = std::log(y[i]);
    mean_log += log_y[i];
  }
  mean_log /= tau;

  double var_log = 0.0;
  for (double l : log_y) var_log += (l - mean_log) * (l - mean_log);
  var_log /= tau;

  // Bracket the root, then Newton steps that fall back to bisection when they
  // leave the bracket.
  double k = std::clamp(M_PI / std::sqrt(6.0 * var_log), 1e-3, kDegenerateWeibullShape);
  double lo = k, hi = k;
  while (lo > 1e-8 && shape_score(y, log_y, mean_log, lo).value > 0.0) lo *= 0.5;
  while (hi < kDegenerateWeibullShape && shape_score(y, log_y, mean_log, hi).value < 0.0) hi *= 2.0;
  if (hi >= kDegenerateWeibullShape && shape_score(y, log_y, mean_log, hi).value < 0.0) {
    hi = kDegenerateWeibullShape;
    k = hi;
  }

  WeibullFit fit;
  for (fit.iterations = 1; fit.iterations <= kMaxNewtonIterations; ++fit.iterations) {
    const ShapeScore s = shape_score(y, log_y, mean_log, k);
    if (s.value < 0.0) lo = std::max(lo, k); else hi = std::min(hi, k);
    double next = k - s.value / s.slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const bool done = std::abs(next - k) <= kShapeTolerance * std::max(1.0, k);
    k = next;
    if (done) break;
  }
  fit.kappa = std::min(k, kDegenerateWeibullShape);
  double mean_pow = 0.0;
  for (double v : y) mean_pow += std::pow(v, fit.kappa);
  mean_pow /= tau;
  fit.sigma = top * std::pow(mean_pow, 1.0 / fit.kappa);
  return fit;
}

double weibull_cdf(double d, double kappa, double sigma) {
  if (d <= 0.0) return 0.0;
  return -std::expm1(-std::pow(d / sigma, kappa));
}

double weibull_log_likelihood(std::span<const double> samples, double kappa, double sigma) {
  double ll = 0.0;
  for (double x : samples) {
    const double z = x / sigma;
    ll += std::log(kappa / sigma) + (kappa - 1.0) * std::log(z) - std::pow(z, kappa);
  }
  return ll;
}

void OpenMaxConfig::validate(int n_classes) const {
  if (alpha < 1 || alpha > n_classes)
    throw std::invalid_argument(fmt::format("alpha {} outside [1, {}]", alpha, n_classes));
  if (!(delta >= 0.0 && delta <= 1.0))
    throw std::invalid_argument(fmt::format("delta {} outside [0, 1]", delta));
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
}

std::vector<Eigen::VectorXd> fit_mav(const ClassActivations& activations, int min_count) {
  std::vector<int> short_classes;
  for (std::size_t c = 0; c < activations.size(); ++c)
    if (static_cast<int>(activations[c].size()) < std::max(1, min_count))
      short_classes.push_back(static_cast<int>(c));
  if (!short_classes.empty())
    throw std::invalid_argument(fmt::format(
        "classes with fewer than {} qualifying activations: {}", min_count, short_classes));

  std::vector<Eigen::VectorXd> mavs;
  for (const auto& group : activations) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(group.front().size());
    for (const auto& a : group) sum += a;
    mavs.push_back(sum / static_cast<double>(group.size()));
  }
  return mavs;
}

bool qualifies_multiclass(const Eigen::VectorXd& logits, int label) {
  return argmax(logits) == label;
}

LabelSet qualifying_multilabel(const Eigen::VectorXd& logits, const LabelSet& truth, int m) {
  const LabelSet top = predict_topm(logits, std::min<int>(m, static_cast<int>(logits.size())));
  LabelSet out;
  std::set_intersection(top.begin(), top.end(), truth.begin(), truth.end(), std::back_inserter(out));
  return out;
}

int TailCalibration::max_tau() const {
  int best = std::numeric_limits<int>::max();
  for (const auto& d : tail_distances) best = std::min(best, static_cast<int>(d.size()));
  return tail_distances.empty() ? 0 : best;
}

TailCalibration calibrate_tails(const ClassActivations& activations, int min_count, int max_tau) {
  TailCalibration cal;
  cal.mavs = fit_mav(activations, min_count);
  for (std::size_t c = 0; c < activations.size(); ++c) {
    std::vector<double> d;
    for (const auto& a : activations[c]) d.push_back((a - cal.mavs[c]).norm());
    std::sort(d.begin(), d.end(), std::greater<>());
    if (static_cast<int>(d.size()) > max_tau) d.resize(max_tau);
    cal.tail_distances.push_back(std::move(d));
  }
  return cal;
}

std::vector<WeibullTailModel> fit_openmax_models(const TailCalibration& calibration, int tau) {
  std::vector<WeibullTailModel> models;
  for (int c = 0; c < calibration.n_classes(); ++c) {
    const WeibullFit fit = fit_weibull_tail(calibration.tail_distances[c], tau);
    models.push_back({c, calibration.mavs[c], fit.kappa, fit.sigma, tau, fit.degenerate});
  }
  return models;
}

Recalibration openmax_recalibrate(const Eigen::VectorXd& logits,
                                  std::span<const WeibullTailModel> models, int alpha) {
  const int n = static_cast<int>(logits.size());
  if (static_cast<int>(models.size()) != n)
    throw std::invalid_argument(fmt::format("{} Weibull models for {} classes", models.size(), n));
  if (alpha < 1 || alpha > n) throw std::invalid_argument(fmt::format("alpha {} outside [1, {}]", alpha, n));

  std::vector<int> rank(n);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return logits[a] > logits[b]; });

  Recalibration out{logits, 0.0};
  for (int r = 1; r <= alpha; ++r) {
    const int j = rank[r - 1];
    const WeibullTailModel& model = models[j];
    if (model.mav.size() != logits.size())
      throw std::invalid_argument(fmt::format("class {} MAV has the wrong dimension", j));
    const double w = weibull_cdf((logits - model.mav).norm(), model.kappa, model.sigma);
    const double scale = 1.0 - (static_cast<double>(alpha - r + 1) / alpha) * w;
    out.logits[j] = logits[j] * scale;
    out.unknown_logit += logits[j] * (1.0 - scale);
  }
  return out;
}

OpenSetDecision decide_msp(const Eigen::VectorXd& probabilities, double delta) {
  if (probabilities.size() == 0) throw std::invalid_argument("decide_msp on an empty vector");
  return {probabilities.maxCoeff() < delta ? 1 : 0, std::nullopt, std::nullopt};
}

OpenSetDecision decide_msp_per_source(std::span<const Eigen::VectorXd> probabilities, double delta) {
  if (probabilities.empty()) throw std::invalid_argument("decide_msp_per_source needs >= 1 source");
  OpenSetDecision d;
  for (const auto& p : probabilities) d.unknown |= decide_msp(p, delta).unknown;
  return d;
}

OpenSetDecision decide_openmax(const Eigen::VectorXd& logits,
                               std::span<const WeibullTailModel> models,
                               const OpenMaxConfig& config, OutputActivation activation) {
  config.validate(static_cast<int>(logits.size()));
  const Recalibration rc = openmax_recalibrate(logits, models, config.alpha);
  OpenSetDecision d;
  if (activation == OutputActivation::kSoftmax) {
    Eigen::VectorXd extended(logits.size() + 1);
    extended << rc.logits, rc.unknown_logit;
    const Eigen::VectorXd p = softmax(extended);
    d.recalibrated = p.head(logits.size());
    d.unknown_probability = p[logits.size()];
  } else {
    d.recalibrated = sigmoid(rc.logits);
    d.unknown_probability = 1.0 / (1.0 + std::exp(-rc.unknown_logit));
  }
  const double peak = d.recalibrated->maxCoeff();
  d.unknown = (peak < config.delta || *d.unknown_probability >= peak) ? 1 : 0;
  return d;
}

OpenSetDecision decide_openmax_per_source(std::span<const Eigen::VectorXd> source_logits,
                                          std::span<const WeibullTailModel> models,
                                          const OpenMaxConfig& config) {
  if (source_logits.empty()) throw std::invalid_argument("decide_openmax_per_source needs >= 1 source");
  OpenSetDecision out;
  double max_pu = 0.0;
  for (const auto& v : source_logits) {
    const OpenSetDecision d = decide_openmax(v, models, config, OutputActivation::kSoftmax);
    out.unknown |= d.unknown;
    max_pu = std::max(max_pu, *d.unknown_probability);
  }
  out.unknown_probability = max_pu;
  return out;
}

void save_tail_calibration(const std::filesystem::path& bin_path, const TailCalibration& calibration,
                           int tau) {
  FloatTable table;
  nlohmann::json classes = nlohmann::json::array();
  const int usable_tau = std::min(tau, calibration.max_tau());
  for (int c = 0; c < calibration.n_classes(); ++c) {
    const Eigen::VectorXd& mav = calibration.mavs[c];
    const auto row = table.append(std::span<const double>(mav.data(), static_cast<std::size_t>(mav.size())));
    const WeibullFit fit = fit_weibull_tail(calibration.tail_distances[c], usable_tau);
    classes.push_back({{"class_index", c},
                       {"mav_row", row},
                       {"kappa", fit.kappa},
                       {"sigma", fit.sigma},
                       {"tau", usable_tau},
                       {"degenerate", fit.degenerate},
                       {"tail_distances", calibration.tail_distances[c]}});
  }
  write_table(bin_path, table, {{"kind", "openmax_bank"}, {"classes", std::move(classes)}});
}

TailCalibration load_tail_calibration(const std::filesystem::path& bin_path) {
  const FloatTable table = read_table(bin_path);
  const nlohmann::json sidecar = read_sidecar(bin_path);
  if (sidecar.at("kind") != "openmax_bank")
    throw std::runtime_error(bin_path.string() + " is not an OpenMax bank");
  TailCalibration cal;
  for (const auto& entry : sidecar.at("classes")) {
    const auto row = table.row(entry.at("mav_row").get<std::uint64_t>());
    Eigen::VectorXd mav(static_cast<Eigen::Index>(row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) mav[static_cast<Eigen::Index>(i)] = row[i];
    cal.mavs.push_back(std::move(mav));
    cal.tail_distances.push_back(entry.at("tail_distances").get<std::vector<double>>());
  }
  return cal;
}

}  // namespace mlos
