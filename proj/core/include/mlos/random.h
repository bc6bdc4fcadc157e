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

#ifndef MLOS_RANDOM_H_
#define MLOS_RANDOM_H_

#include <cstdint>
#include <random>

namespace mlos {

using Rng = std::mt19937_64;

// Mixes (seed, stream, index) into an independent 64-bit seed with the
// splitmix64 finalizer. Streams name a consumer ("prototypes", "events", ...)
// so that adding a consumer never perturbs the draws of another.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t index = 0);

// FNV-1a over a string, used to name seed streams and hash configs.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t stream_id(const char* name);

double uniform(Rng& rng, double lo, double hi);
double log_uniform(Rng& rng, double lo, double hi);
double standard_normal(Rng& rng);
int uniform_int(Rng& rng, int lo, int hi);  // inclusive

}  // namespace mlos

#endif  // MLOS_RANDOM_H_
