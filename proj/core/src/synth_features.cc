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

#include "mlos/synth_features.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mlos/binary_io.h"
#include "mlos/random.h"

namespace mlos {

namespace {

Eigen::VectorXd gaussian_vector(Rng& rng, int dim, double std_dev) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = std_dev * standard_normal(rng);
  return v;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd row_to_vector(const FloatTable& table, std::uint64_t row) {
  const auto r = table.row(row);
  Eigen::VectorXd v(static_cast<Eigen::Index>(r.size()));
  for (std::size_t i = 0; i < r.size(); ++i) v[static_cast<Eigen::Index>(i)] = r[i];
  return v;
}

}  // namespace

PrototypeBank init_prototypes(int n_classes, int dim, double min_separation,
                              std::uint64_t seed, double jitter_scale, int max_attempts) {
  if (dim < 2) throw std::invalid_argument("prototype dim must be >= 2");
  if (n_classes < 1) throw std::invalid_argument("need at least one prototype");
  if (min_separation < 0.0 || min_separation > 2.0)
    throw std::invalid_argument("cosine separation must lie in [0, 2]");

  PrototypeBank bank;
  bank.dim = dim;
  bank.jitter_scale = jitter_scale;
  Rng rng(derive_seed(seed, stream_id("prototypes")));
  const double max_cosine = 1.0 - min_separation;
  for (int k = 0; k < n_classes; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
      Eigen::VectorXd candidate = gaussian_vector(rng, dim, 1.0);
      const double norm = candidate.norm();
      if (norm == 0.0) continue;
      candidate /= norm;
      placed = std::all_of(bank.prototypes.begin(), bank.prototypes.end(),
                           [&](const Eigen::VectorXd& p) { return p.dot(candidate) <= max_cosine; });
      if (placed) bank.prototypes.push_back(std::move(candidate));
    }
    if (!placed)
      throw std::runtime_error(fmt::format(
          "cannot place prototype {} of {} in {} dimensions with cosine distance >= {} "
          "after {} attempts; lower the separation or raise the dimension",
          k + 1, n_classes, dim, min_separation, max_attempts));
  }
  return bank;
}

double jitter_std(const EventSpec& event, double jitter_scale) {
  return jitter_scale *
         (1.0 + std::abs(event.pitch_shift) / 2.0 + std::abs(event.time_stretch - 1.0) / 0.2) / 3.0;
}

SourceFeature render_source(const EventSpec& event, const PrototypeBank& bank,
                            std::uint64_t seed, const RenderOptions& options) {
  if (event.class_id < 0 || event.class_id >= bank.n_classes())
    throw std::invalid_argument(fmt::format("class {} has no prototype", event.class_id));
  if (!(options.min_energy > 0.0) || options.max_energy < options.min_energy)
    throw std::invalid_argument("energy range must be positive and ordered");
  Rng rng(seed);
  SourceFeature s;
  s.class_id = event.class_id;
  s.energy = log_uniform(rng, options.min_energy, options.max_energy);
  s.vector = bank.prototypes[event.class_id];
  const double sd = jitter_std(event, bank.jitter_scale);
  if (sd > 0.0) s.vector += gaussian_vector(rng, bank.dim, sd);
  return s;
}

Eigen::VectorXd mix(const std::vector<SourceFeature>& sources, double noise_std,
                    std::uint64_t seed) {
  if (sources.empty()) throw std::invalid_argument("cannot mix an empty source list");
  std::vector<const SourceFeature*> order;
  for (const auto& s : sources) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const SourceFeature* a, const SourceFeature* b) {
    if (a->energy != b->energy) return a->energy < b->energy;
    if (a->class_id != b->class_id) return a->class_id < b->class_id;
    return std::lexicographical_compare(a->vector.data(), a->vector.data() + a->vector.size(),
                                        b->vector.data(), b->vector.data() + b->vector.size());
  });

  const auto dim = sources.front().vector.size();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
  double total = 0.0;
  for (const SourceFeature* s : order) {
    if (s->vector.size() != dim) throw std::invalid_argument("sources differ in dimension");
    acc += s->energy * s->vector;
    total += s->energy;
  }
  acc /= total;
  if (noise_std > 0.0) {
    Rng rng(seed);
    acc += gaussian_vector(rng, static_cast<int>(dim), noise_std);
  }
  return acc;
}

EstimateSet corrupt_estimates(const std::vector<SourceFeature>& oracle,
                              const CorruptionOptions& options, std::uint64_t seed) {
  const int m = static_cast<int>(oracle.size());
  if (m < 1 || m > 4) throw std::invalid_argument(fmt::format("need 1..4 oracle sources, got {}", m));
  if (options.leakage < 0.0 || options.noise < 0.0 || options.energy_floor <= 0.0)
    throw std::invalid_argument("leakage and noise must be >= 0, energy floor > 0");

  const auto dim = oracle.front().vector.size();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
  double min_energy = oracle.front().energy;
  for (const auto& s : oracle) {
    total += s.vector;
    min_energy = std::min(min_energy, s.energy);
  }

  Rng rng(seed);
  const double beta = options.leakage;
  const double share = beta / std::max(1, m - 1);
  EstimateSet out;
  for (int i = 0; i < kNumEstimates; ++i) {
    Estimate& e = out[i];
    if (i < m) {
      e.vector = (1.0 - beta) * oracle[i].vector + share * (total - oracle[i].vector);
      e.energy = std::max(1.0 - beta, 1e-9) * oracle[i].energy;
    } else {
      e.vector = Eigen::VectorXd::Zero(dim);
      e.energy = options.energy_floor * min_energy * std::max(uniform(rng, 0.0, 1.0), 1e-6);
    }
    if (options.noise > 0.0) e.vector += gaussian_vector(rng, static_cast<int>(dim), options.noise);
  }
  return out;
}

std::vector<int> oracle_prune(const EstimateSet& estimates, int m) {
  if (m < 1 || m > kNumEstimates)
    throw std::invalid_argument(fmt::format("cannot keep {} of {} estimates", m, kNumEstimates));
  std::vector<int> idx(kNumEstimates);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return estimates[a].energy > estimates[b].energy; });
  idx.resize(m);
  return idx;
}

std::vector<ClassId> ClipFeatures::source_classes() const {
  std::vector<ClassId> out;
  for (const auto& s : sources) out.push_back(s.class_id);
  return out;
}

FeatureDataset render_dataset(const std::vector<SoundscapeSpec>& soundscapes,
                              Pool pool, const PrototypeBank& bank,
                              const SynthOptions& options, std::uint64_t seed) {
  FeatureDataset ds;
  ds.dim = bank.dim;
  std::int64_t next_clip = 0;
  for (const SoundscapeSpec& spec : soundscapes) {
    std::vector<SourceFeature> rendered;
    for (std::size_t e = 0; e < spec.events.size(); ++e) {
      const auto sid = virtual_source_id(pool, spec.id, static_cast<int>(e));
      rendered.push_back(render_source(spec.events[e], bank,
                                       derive_seed(seed, stream_id("source"), static_cast<std::uint64_t>(sid)),
                                       options.render));
    }
    for (const ClipSpec& clip : window_clips(spec, next_clip)) {
      ClipFeatures cf;
      cf.clip_id = clip.id;
      cf.labels = clip.labels;
      cf.polyphony = clip.polyphony;
      const double width = clip.end - clip.start;
      for (std::size_t k = 0; k < clip.event_indices.size(); ++k) {
        SourceFeature s = rendered[clip.event_indices[k]];
        s.energy *= clip.overlaps[k] / width;
        cf.sources.push_back(std::move(s));
      }
      const auto cid = static_cast<std::uint64_t>(clip.id);
      cf.mixture = mix(cf.sources, options.mixture_noise, derive_seed(seed, stream_id("mix"), cid));
      cf.estimates = corrupt_estimates(cf.sources, options.corruption,
                                       derive_seed(seed, stream_id("estimates"), cid));
      ds.clips.push_back(std::move(cf));
    }
    next_clip += static_cast<std::int64_t>(spec.events.size());
  }
  return ds;
}

void save_dataset(const std::filesystem::path& bin_path, const FeatureDataset& dataset) {
  FloatTable table;
  table.dim = static_cast<std::uint32_t>(dataset.dim);
  nlohmann::json clips = nlohmann::json::array();
  for (const ClipFeatures& c : dataset.clips) {
    nlohmann::json entry;
    entry["id"] = c.clip_id;
    entry["labels"] = c.labels;
    entry["m"] = c.polyphony;
    entry["mixture_row"] = table.append(to_std(c.mixture));
    std::vector<ClassId> classes;
    std::vector<double> energies;
    entry["oracle_row"] = table.rows();
    for (const auto& s : c.sources) {
      table.append(to_std(s.vector));
      classes.push_back(s.class_id);
      energies.push_back(s.energy);
    }
    entry["oracle_classes"] = classes;
    entry["oracle_energies"] = energies;
    entry["estimate_row"] = table.rows();
    energies.clear();
    for (const auto& e : c.estimates) {
      table.append(to_std(e.vector));
      energies.push_back(e.energy);
    }
    entry["estimate_energies"] = energies;
    clips.push_back(std::move(entry));
  }
  nlohmann::json sidecar = {{"kind", "features"},
                            {"version", kBinaryFormatVersion},
                            {"dim", dataset.dim},
                            {"estimates_per_clip", kNumEstimates},
                            {"clips", std::move(clips)}};
  write_table(bin_path, table, sidecar);
}

FeatureDataset load_dataset(const std::filesystem::path& bin_path) {
  const FloatTable table = read_table(bin_path);
  const nlohmann::json sidecar = read_sidecar(bin_path);
  if (sidecar.at("kind") != "features")
    throw std::runtime_error(bin_path.string() + " is not a feature dataset");
  FeatureDataset ds;
  ds.dim = sidecar.at("dim").get<int>();
  if (static_cast<std::uint32_t>(ds.dim) != table.dim && table.rows() > 0)
    throw std::runtime_error(bin_path.string() + ": sidecar dim disagrees with header");
  for (const auto& entry : sidecar.at("clips")) {
    ClipFeatures c;
    c.clip_id = entry.at("id").get<std::int64_t>();
    c.labels = entry.at("labels").get<LabelSet>();
    c.polyphony = entry.at("m").get<int>();
    c.mixture = row_to_vector(table, entry.at("mixture_row").get<std::uint64_t>());
    const auto oracle_row = entry.at("oracle_row").get<std::uint64_t>();
    const auto classes = entry.at("oracle_classes").get<std::vector<ClassId>>();
    const auto energies = entry.at("oracle_energies").get<std::vector<double>>();
    for (std::size_t k = 0; k < classes.size(); ++k)
      c.sources.push_back({row_to_vector(table, oracle_row + k), energies[k], classes[k]});
    const auto estimate_row = entry.at("estimate_row").get<std::uint64_t>();
    const auto est_energies = entry.at("estimate_energies").get<std::vector<double>>();
    for (int k = 0; k < kNumEstimates; ++k)
      c.estimates[k] = {row_to_vector(table, estimate_row + k), est_energies.at(k)};
    ds.clips.push_back(std::move(c));
  }
  return ds;
}

void save_prototypes(const std::filesystem::path& bin_path, const PrototypeBank& bank) {
  FloatTable table;
  table.dim = static_cast<std::uint32_t>(bank.dim);
  for (const auto& p : bank.prototypes) table.append(to_std(p));
  write_table(bin_path, table,
              {{"kind", "prototypes"},
               {"dim", bank.dim},
               {"classes", bank.n_classes()},
               {"jitter_scale", bank.jitter_scale}});
}

PrototypeBank load_prototypes(const std::filesystem::path& bin_path) {
  const FloatTable table = read_table(bin_path);
  const nlohmann::json sidecar = read_sidecar(bin_path);
  PrototypeBank bank;
  bank.dim = sidecar.at("dim").get<int>();
  bank.jitter_scale = sidecar.at("jitter_scale").get<double>();
  for (std::uint64_t r = 0; r < table.rows(); ++r) bank.prototypes.push_back(row_to_vector(table, r));
  return bank;
}

}  // namespace mlos
