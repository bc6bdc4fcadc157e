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

#ifndef MLOS_COMMON_H_
#define MLOS_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mlos {

using ClassId = int;

// Sorted, duplicate-free list of class IDs.
using LabelSet = std::vector<ClassId>;

enum class SplitTag { kKnownKnown, kKnownUnknown, kUnknownUnknown };

enum class OpennessMode { kLow, kHigh };

// Which generated split a soundscape belongs to. Train and validation are
// drawn from training-visible classes only.
enum class Pool { kTrain, kVal, kTest, kTuning };

std::string_view to_string(SplitTag tag);
std::string_view to_string(OpennessMode mode);
std::string_view to_string(Pool pool);

OpennessMode parse_openness_mode(std::string_view text);
Pool parse_pool(std::string_view text);

// Raised when a configuration document or flag is malformed.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a pipeline stage finds that an upstream output is absent.
class MissingArtifactError : public std::runtime_error {
 public:
  MissingArtifactError(const std::string& what, std::string upstream_stage)
      : std::runtime_error(what), upstream_stage_(std::move(upstream_stage)) {}
  const std::string& upstream_stage() const { return upstream_stage_; }

 private:
  std::string upstream_stage_;
};

}  // namespace mlos

#endif  // MLOS_COMMON_H_
