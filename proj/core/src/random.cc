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

#include "mlos/random.h"

#include <cmath>
#include <cstring>

#include "mlos/common.h"

namespace mlos {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) + index);
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t stream_id(const char* name) {
  return fnv1a64(name, std::strlen(name));
}

// The draws below are written out instead of using <random> distributions so
// that generated datasets are identical across standard library vendors.
double uniform(Rng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

double standard_normal(Rng& rng) {
  // Box-Muller; u1 in (0, 1].
  const double u1 = 1.0 - uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int uniform_int(Rng& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kKnownKnown: return "KK";
    case SplitTag::kKnownUnknown: return "KU";
    case SplitTag::kUnknownUnknown: return "UU";
  }
  return "?";
}

std::string_view to_string(OpennessMode mode) {
  return mode == OpennessMode::kLow ? "low" : "high";
}

std::string_view to_string(Pool pool) {
  switch (pool) {
    case Pool::kTrain: return "train";
    case Pool::kVal: return "val";
    case Pool::kTest: return "test";
    case Pool::kTuning: return "tuning";
  }
  return "?";
}

OpennessMode parse_openness_mode(std::string_view text) {
  if (text == "low") return OpennessMode::kLow;
  if (text == "high") return OpennessMode::kHigh;
  throw ConfigError("openness mode must be 'low' or 'high', got '" +
                    std::string(text) + "'");
}

Pool parse_pool(std::string_view text) {
  if (text == "train") return Pool::kTrain;
  if (text == "val") return Pool::kVal;
  if (text == "test") return Pool::kTest;
  if (text == "tuning") return Pool::kTuning;
  throw ConfigError("unknown pool '" + std::string(text) + "'");
}

}  // namespace mlos
