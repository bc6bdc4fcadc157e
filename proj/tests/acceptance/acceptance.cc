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

// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlos/binary_io.h"
#include "mlos/classifier.h"
#include "mlos/dataset_plan.h"
#include "mlos/eval.h"
#include "mlos/experiment.h"
#include "mlos/openset.h"
#include "mlos/random.h"
#include "oracles.h"

namespace fs = std::filesystem;
using namespace mlos;

namespace {

// Tolerances, fixed here so every run checks the same thresholds.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-4;
constexpr double kGradFloor = 1e-6;
constexpr double kPitTol = 1e-9;
constexpr double kWeibullShapeRelTol = 0.10;
constexpr double kWeibullScaleRelTol = 0.05;
constexpr double kWeibullGridHalfWidth = 0.2;
constexpr double kMassTol = 1e-12;
constexpr double kMetricTol = 1e-12;
// Exact rational results, up to double rounding.
constexpr double kExactTol = 4 * std::numeric_limits<double>::epsilon();
constexpr double kOrderSlackPoints = 1.0;
constexpr double kBaselineMarginPoints = 5.0;
constexpr double kClosedSetSlack = 0.01;
constexpr double kOpenMaxSlackPoints = 0.5;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << name;
  if (!o.detail.empty()) std::cout << "  [" << o.detail << "]";
  std::cout << std::endl;
  if (!o.pass) ++failures;
}

std::string sci(double x) {
  std::ostringstream s;
  s.precision(2);
  s << std::scientific << x;
  return s.str();
}

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << x;
  return s.str();
}

Outcome openness() {
  struct Case {
    int c_tr, c_te;
    double expected;
  };
  const Case cases[] = {{72, 89, 0.05}, {71, 89, 0.06}, {54, 89, 0.13}, {53, 89, 0.14}};
  Outcome o;
  for (const Case& c : cases) {
    const double got = std::round(compute_openness(c.c_tr, c.c_te).o_star * 100.0) / 100.0;
    o.pass &= got == c.expected;
    o.detail += "(" + std::to_string(c.c_tr) + "," + std::to_string(c.c_te) + ")=" + fmt(got, 2) + " ";
  }
  return o;
}

Outcome split_table() {
  // Rows of the published class-split table, variants 1..5.
  const char* low[5][5] = {{"KK", "KK", "KK", "KU", "UU"},
                           {"UU", "KK", "KK", "KK", "KU"},
                           {"KU", "UU", "KK", "KK", "KK"},
                           {"KK", "KU", "UU", "KK", "KK"},
                           {"KK", "KK", "KU", "UU", "KK"}};
  const char* high[5][5] = {{"KK", "KK", "KK", "UU", "UU"},
                            {"UU", "KK", "KK", "KK", "UU"},
                            {"UU", "UU", "KK", "KK", "KK"},
                            {"KK", "UU", "UU", "KK", "KK"},
                            {"KK", "KK", "UU", "UU", "KK"}};
  auto code = [](SplitTag t) {
    return t == SplitTag::kKnownKnown ? "KK" : t == SplitTag::kKnownUnknown ? "KU" : "UU";
  };
  Outcome o;
  int cells = 0, wrong = 0;
  for (OpennessMode mode : {OpennessMode::kLow, OpennessMode::kHigh}) {
    const auto splits = make_split_variants(ClassVocabulary::uniform(89), 5, mode);
    const auto& table = mode == OpennessMode::kLow ? low : high;
    for (int v = 0; v < 5; ++v)
      for (int s = 0; s < 5; ++s, ++cells) wrong += std::strcmp(code(splits[v].assignment[s]), table[v][s]) != 0;
    for (const auto& sp : splits) {
      std::vector<std::size_t> sizes;
      for (const auto& sub : sp.subsets) sizes.push_back(sub.size());
      o.pass &= sizes == std::vector<std::size_t>{18, 18, 18, 18, 17};
    }
  }
  o.pass &= wrong == 0;
  o.detail = std::to_string(cells - wrong) + "/" + std::to_string(cells) + " cells match";
  return o;
}

Outcome gradients() {
  Outcome o;
  double worst = 0;
  struct Case {
    LossKind kind;
    int m;
  };
  const Case cases[] = {{LossKind::kBce, 1}, {LossKind::kCe, 1}, {LossKind::kPit, 2}, {LossKind::kPit, 3}};
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n01;
  for (const Case& c : cases) {
    const std::vector<int> sizes = {8, 8, 8};
    MlpParams p = MlpParams::init(sizes, 7 + c.m);
    for (auto& l : p.layers)
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.3 * n01(rng);
    std::vector<Example> batch;
    for (int b = 0; b < 6; ++b) {
      Example ex;
      ex.inputs.resize(8, c.m);
      for (Eigen::Index i = 0; i < ex.inputs.size(); ++i) ex.inputs.data()[i] = n01(rng);
      if (c.kind == LossKind::kBce) {
        for (int j = 0; j < 8; ++j)
          if (rng() % 3 == 0) ex.targets.push_back(j);
      } else {
        for (int s = 0; s < c.m; ++s) ex.targets.push_back(static_cast<int>(rng() % 8));
      }
      batch.push_back(ex);
    }
    const auto lg = compute_gradients(p, batch, c.kind);
    const auto r = oracle::check_gradient(p, lg.gradient, batch, c.kind, kGradStep, kGradFloor);
    worst = std::max(worst, r.max_rel_error);
  }
  o.pass = worst < kGradRelTol;
  o.detail = "max relative error " + sci(worst);
  return o;
}

Outcome pit_oracle() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n01;
  double worst = 0, worst_perm = 0;
  for (int t = 0; t < 1000; ++t) {
    const int m = 1 + static_cast<int>(rng() % 4);
    const int n = m + static_cast<int>(rng() % 5);
    Eigen::MatrixXd z(m, n);
    std::vector<std::vector<double>> rows(m, std::vector<double>(n));
    for (int s = 0; s < m; ++s)
      for (int c = 0; c < n; ++c) rows[s][c] = z(s, c) = 2.0 * n01(rng);
    std::vector<int> labels(m);
    for (int& l : labels) l = static_cast<int>(rng() % n);
    const double got = pit_loss(z, labels).loss;
    worst = std::max(worst, std::abs(got - oracle::pit_min(rows, labels)));
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd zp(m, n);
    for (int s = 0; s < m; ++s) zp.row(s) = z.row(perm[s]);
    worst_perm = std::max(worst_perm, std::abs(pit_loss(zp, labels).loss - got));
  }
  o.pass = worst <= kPitTol && worst_perm <= kPitTol;
  o.detail = "max |pit - oracle| " + sci(worst) + ", max permutation change " + sci(worst_perm);
  return o;
}

// Log-likelihood of a Weibull sample from its sufficient pieces.
double loglik(const std::vector<double>& x, double k, double s) {
  double sum_log = 0, sum_pow = 0;
  for (double v : x) {
    sum_log += std::log(v);
    sum_pow += std::pow(v / s, k);
  }
  const double n = static_cast<double>(x.size());
  return n * std::log(k / s) + (k - 1) * (sum_log - n * std::log(s)) - sum_pow;
}

Outcome weibull() {
  Outcome o;
  double mean_k = 0, mean_s = 0;
  int grid_violations = 0;
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(2000);
    for (double& v : x) v = std::pow(-std::log1p(-u(rng)), 1.0 / 2.0);
    const WeibullFit f = fit_weibull_tail(x, 2000);
    mean_k += f.kappa / 20;
    mean_s += f.sigma / 20;
    const double best = loglik(x, f.kappa, f.sigma);
    double sum_log = 0;
    for (double v : x) sum_log += std::log(v);
    for (int i = 0; i < 100; ++i) {
      const double k = f.kappa * (1 - kWeibullGridHalfWidth + 2 * kWeibullGridHalfWidth * i / 99.0);
      double sum_xk = 0;
      for (double v : x) sum_xk += std::pow(v, k);
      for (int j = 0; j < 100; ++j) {
        const double s = f.sigma * (1 - kWeibullGridHalfWidth + 2 * kWeibullGridHalfWidth * j / 99.0);
        const double n = 2000;
        const double ll = n * std::log(k) - n * k * std::log(s) + (k - 1) * sum_log - sum_xk / std::pow(s, k);
        if (ll > best + 1e-9 * std::abs(best)) ++grid_violations;
      }
    }
  }
  o.pass = std::abs(mean_k - 2.0) <= kWeibullShapeRelTol * 2.0 && std::abs(mean_s - 1.0) <= kWeibullScaleRelTol &&
           grid_violations == 0;
  o.detail = "mean kappa " + fmt(mean_k) + ", mean sigma " + fmt(mean_s) + ", grid points above fit " +
             std::to_string(grid_violations);
  return o;
}

Outcome openmax_identities() {
  Outcome o;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(0.5, 4.0);
  double worst_identity = 0, worst_mass = 0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + static_cast<int>(rng() % 10);
    Eigen::VectorXd v(n);
    for (int j = 0; j < n; ++j) v[j] = 3 * n01(rng);
    const int alpha = 1 + static_cast<int>(rng() % n);
    std::vector<WeibullTailModel> at_v, random;
    for (int j = 0; j < n; ++j) {
      WeibullTailModel m;
      m.class_index = j;
      m.kappa = u(rng);
      m.sigma = u(rng);
      m.mav = v;
      at_v.push_back(m);
      for (int k = 0; k < n; ++k) m.mav[k] = 3 * n01(rng);
      random.push_back(m);
    }
    const auto id = openmax_recalibrate(v, at_v, alpha);
    worst_identity = std::max({worst_identity, (id.logits - v).cwiseAbs().maxCoeff(), std::abs(id.unknown_logit)});
    const auto rc = openmax_recalibrate(v, random, alpha);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return v[a] > v[b]; });
    double before = 0, after = rc.unknown_logit;
    for (int r = 0; r < alpha; ++r) {
      before += v[order[r]];
      after += rc.logits[order[r]];
    }
    worst_mass = std::max(worst_mass, std::abs(before - after));
  }
  o.pass = worst_identity == 0.0 && worst_mass <= kMassTol;
  o.detail = "zero-distance deviation " + sci(worst_identity) + ", max mass error " +
             sci(worst_mass);
  return o;
}

Outcome metrics() {
  Outcome o;
  std::mt19937_64 rng(17);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const int clips = 1 + static_cast<int>(rng() % 8), n_cls = 1 + static_cast<int>(rng() % 5);
    std::vector<LabelSet> p(clips), y(clips);
    Eigen::MatrixXd scores(clips, n_cls);
    for (int i = 0; i < clips; ++i)
      for (int c = 0; c < n_cls; ++c) {
        if (rng() % 3 == 0) p[i].push_back(c);
        if (rng() % 2 == 0) y[i].push_back(c);
        scores(i, c) = static_cast<double>(rng() % 5) / 4.0;
      }
    std::vector<ClassId> classes(n_cls);
    std::iota(classes.begin(), classes.end(), 0);
    worst = std::max(worst, std::abs(micro_f1(p, y) - oracle::micro_f1(p, y)));
    worst = std::max(worst, std::abs(macro_f1(p, y, classes) - oracle::macro_f1(p, y, classes)));
    double total = 0;
    int counted = 0;
    for (int c = 0; c < n_cls; ++c) {
      std::vector<double> s(clips);
      std::vector<int> rel(clips);
      int pos = 0;
      for (int i = 0; i < clips; ++i) {
        s[i] = scores(i, c);
        pos += rel[i] = std::count(y[i].begin(), y[i].end(), c) > 0;
      }
      if (pos == 0) continue;
      total += oracle::average_precision(s, rel);
      ++counted;
    }
    if (counted == 0) continue;
    worst = std::max(worst, std::abs(mean_average_precision(scores, y, classes).map - total / counted));
  }
  const double ap = average_precision(std::vector<double>{0.9, 0.8, 0.7}, std::vector<int>{1, 0, 1});
  o.pass = worst <= kMetricTol && std::abs(ap - 5.0 / 6.0) <= kExactTol;
  o.detail = "max deviation " + sci(worst) + ", worked AP " + fmt(ap, 17);
  return o;
}

struct RunSummary {
  nlohmann::json report;
  std::string table2, table3;
  bool ok = false;
  std::string error;
};

RunSummary full_run(const fs::path& dir) {
  RunSummary r;
  try {
    ExperimentConfig cfg;
    cfg.output_dir = dir.string();
    Experiment e(cfg, &std::cerr);
    e.run_all();
    r.report = nlohmann::json::parse(read_text_file(dir / "report" / "report.json"));
    r.table2 = read_text_file(dir / "report" / "table2.txt");
    r.table3 = read_text_file(dir / "report" / "table3.txt");
    r.ok = true;
  } catch (const std::exception& ex) {
    r.error = ex.what();
  }
  return r;
}

const nlohmann::json* model_entry(const nlohmann::json& report, const std::string& name) {
  for (const auto& m : report.at("models"))
    if (m.at("name") == name) return &m;
  return nullptr;
}

Outcome trends(const RunSummary& run) {
  Outcome o;
  if (!run.ok) return {false, "run failed: " + run.error};
  const std::vector<std::string> order = {"oracle_mc", "oracle_pit", "multi_label", "estimates_pit"};
  auto mean = [&](const std::string& model, const char* metric) {
    return model_entry(run.report, model)->at(metric).at("mean").get<double>();
  };
  for (const auto& m : order)
    if (!model_entry(run.report, m)) return {false, "no results for " + m};
  const double baseline = run.report.at("majority_baseline").at("mean").get<double>();
  std::ostringstream d;
  d << "msp:";
  for (const auto& m : order) d << " " << m << "=" << fmt(mean(m, "msp_accuracy"), 2);
  for (std::size_t i = 0; i + 1 < order.size(); ++i)
    o.pass &= mean(order[i], "msp_accuracy") - mean(order[i + 1], "msp_accuracy") >= -kOrderSlackPoints;
  d << "; baseline=" << fmt(baseline, 2);
  for (const auto& m : run.report.at("models")) {
    const double margin = m.at("msp_accuracy").at("mean").get<double>() - baseline;
    o.pass &= margin >= kBaselineMarginPoints;
    d << " " << m.at("name").get<std::string>() << "+" << fmt(margin, 2);
  }
  for (const char* metric : {"micro_f1", "macro_f1", "map"}) {
    d << "; " << metric << ":";
    for (const auto& m : order) d << " " << fmt(mean(m, metric), 3);
    for (std::size_t i = 0; i + 1 < order.size(); ++i)
      o.pass &= mean(order[i], metric) - mean(order[i + 1], metric) >= -kClosedSetSlack;
  }
  o.detail = d.str();
  return o;
}

Outcome openmax_vs_msp(const RunSummary& run) {
  if (!run.ok) return {false, "run failed: " + run.error};
  const nlohmann::json* m = model_entry(run.report, "oracle_pit");
  if (!m || m->at("openmax_accuracy").is_null()) return {false, "no OpenMax result for oracle_pit"};
  const double msp = m->at("msp_accuracy").at("mean").get<double>();
  const double om = m->at("openmax_accuracy").at("mean").get<double>();
  std::ostringstream d;
  d << "openmax " << fmt(om, 2) << " vs msp " << fmt(msp, 2) << "; per seed (openmax/msp):";
  const auto& ov = m->at("openmax_accuracy").at("values");
  const auto& mv = m->at("msp_accuracy").at("values");
  for (std::size_t i = 0; i < ov.size(); ++i) d << " " << fmt(ov[i].get<double>(), 1) << "/" << fmt(mv[i].get<double>(), 1);
  return {om >= msp - kOpenMaxSlackPoints, d.str()};
}

Outcome reproducible(const RunSummary& a, const RunSummary& b) {
  if (!a.ok || !b.ok) return {false, "run failed: " + a.error + b.error};
  const bool same = a.table2 == b.table2 && a.table3 == b.table3;
  return {same, same ? "table2 and table3 byte-identical" : "tables differ"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path workdir = fs::temp_directory_path() / "mlos_acceptance";
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--workdir") workdir = argv[i + 1];

  report(1, "openness reproduction", openness());
  report(2, "split-variant structure", split_table());
  report(3, "gradient correctness", gradients());
  report(4, "PIT oracle equivalence", pit_oracle());
  report(5, "Weibull recovery", weibull());
  report(6, "OpenMax identities", openmax_identities());
  report(7, "metric oracles", metrics());

  // Fresh directories, so neither run can reuse the other's artifacts.
  fs::remove_all(workdir);
  const RunSummary first = full_run(workdir / "run_a");
  report(8, "end-to-end trend check", trends(first));
  report(9, "OpenMax vs MSP on oracle PIT", openmax_vs_msp(first));
  const RunSummary second = full_run(workdir / "run_b");
  report(10, "reproducibility", reproducible(first, second));

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
