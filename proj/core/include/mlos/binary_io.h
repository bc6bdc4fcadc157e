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

#ifndef MLOS_BINARY_IO_H_
#define MLOS_BINARY_IO_H_

// Project binary container. A `.bin` file holds a 32-byte header
//
//   bytes 0-7   magic "MLOSBIN1"
//   bytes 8-11  format version (uint32, little-endian)
//   bytes 12-15 row dimension (uint32)
//   bytes 16-23 row count (uint64)
//   bytes 24-31 reserved, zero
//
// followed by rows x dim little-endian float32 values. Every `.bin` has a
// sibling `.json` sidecar describing what the rows mean.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace mlos {

inline constexpr std::uint32_t kBinaryFormatVersion = 1;

struct FloatTable {
  std::uint32_t dim = 0;
  std::vector<float> values;

  std::uint64_t rows() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const float> row(std::uint64_t i) const {
    return {values.data() + i * dim, dim};
  }
  // Appends a row and returns its index.
  std::uint64_t append(std::span<const double> row);
};

std::filesystem::path sidecar_path(const std::filesystem::path& bin_path);

void write_table(const std::filesystem::path& bin_path, const FloatTable& table,
                 const nlohmann::json& sidecar);
FloatTable read_table(const std::filesystem::path& bin_path);
nlohmann::json read_sidecar(const std::filesystem::path& bin_path);

// Writes text atomically enough for our purposes: temp file then rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mlos

#endif  // MLOS_BINARY_IO_H_
