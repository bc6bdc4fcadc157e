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

#ifndef MLOS_SYNTH_FEATURES_H_
#define MLOS_SYNTH_FEATURES_H_

// Feature-space stand-in for an audio embedding front end plus a universal
// source separator. Each class owns a unit-norm prototype; sources are jittered
// prototypes, clips are energy-weighted mixtures, and "source estimates" are
// the oracle sources after controlled cross-source leakage and noise.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "mlos/common.h"
#include "mlos/dataset_plan.h"

namespace mlos {

inline constexpr int kNumEstimates = 8;

struct PrototypeBank {
  int dim = 0;
  std::vector<Eigen::VectorXd> prototypes;
  double jitter_scale = 0.0;

  int n_classes() const { return static_cast<int>(prototypes.size()); }
};

// `min_separation` is a floor on cosine distance (1 - cos) between every pair
// of prototypes. Each prototype gets at most `max_attempts` rejection draws.
PrototypeBank init_prototypes(int n_classes, int dim, double min_separation,
                              std::uint64_t seed, double jitter_scale = 0.0,
                              int max_attempts = 100000);

struct SourceFeature {
  Eigen::VectorXd vector;
  double energy = 1.0;
  ClassId class_id = 0;
};

struct Estimate {
  Eigen::VectorXd vector;
  double energy = 1.0;
};

using EstimateSet = std::array<Estimate, kNumEstimates>;

struct RenderOptions {
  double min_energy = 0.5;
  double max_energy = 2.0;
};

// Standard deviation of the per-coordinate jitter applied for an event.
double jitter_std(const EventSpec& event, double jitter_scale);

SourceFeature render_source(const EventSpec& event, const PrototypeBank& bank,
                            std::uint64_t seed, const RenderOptions& options = {});

// Energy-weighted mean of the source vectors plus isotropic Gaussian noise.
// Summation runs in a canonical order so the result does not depend on the
// order of `sources`.
Eigen::VectorXd mix(const std::vector<SourceFeature>& sources, double noise_std,
                    std::uint64_t seed);

struct CorruptionOptions {
  double leakage = 0.25;      // beta
  double noise = 0.1;         // gamma, per-coordinate std
  double energy_floor = 0.8;  // residual channels draw energy below floor * min oracle energy
};

EstimateSet corrupt_estimates(const std::vector<SourceFeature>& oracle,
                              const CorruptionOptions& options, std::uint64_t seed);

// Indices of the m highest-energy estimates, descending energy, ties by index.
std::vector<int> oracle_prune(const EstimateSet& estimates, int m);

// A rendered clip: the mixture, its oracle sources and the 8 estimates.
struct ClipFeatures {
  std::int64_t clip_id = 0;
  LabelSet labels;
  int polyphony = 0;
  Eigen::VectorXd mixture;
  std::vector<SourceFeature> sources;  // one per overlapping event
  EstimateSet estimates;

  std::vector<ClassId> source_classes() const;
};

struct FeatureDataset {
  int dim = 0;
  std::vector<ClipFeatures> clips;
};

struct SynthOptions {
  RenderOptions render;
  CorruptionOptions corruption;
  double mixture_noise = 0.02;
};

// Renders every clip of every soundscape. A source's vector is rendered once
// per event; inside a clip its energy is scaled by the fraction of the window
// it overlaps.
FeatureDataset render_dataset(const std::vector<SoundscapeSpec>& soundscapes,
                              Pool pool, const PrototypeBank& bank,
                              const SynthOptions& options, std::uint64_t seed);

// Binary payload plus JSON sidecar; see binary_io.h for the container.
void save_dataset(const std::filesystem::path& bin_path, const FeatureDataset& dataset);
FeatureDataset load_dataset(const std::filesystem::path& bin_path);

void save_prototypes(const std::filesystem::path& bin_path, const PrototypeBank& bank);
PrototypeBank load_prototypes(const std::filesystem::path& bin_path);

}  // namespace mlos

#endif  // MLOS_SYNTH_FEATURES_H_
