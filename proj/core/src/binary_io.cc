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

#include "mlos/binary_io.h"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mlos {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'L', 'O', 'S', 'B', 'I', 'N', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const unsigned char* bytes) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

std::uint64_t FloatTable::append(std::span<const double> row) {
  if (dim == 0) dim = static_cast<std::uint32_t>(row.size());
  if (row.size() != dim) throw std::invalid_argument("row width does not match table dim");
  for (double v : row) values.push_back(static_cast<float>(v));
  return rows() - 1;
}

std::filesystem::path sidecar_path(const std::filesystem::path& bin_path) {
  std::filesystem::path p = bin_path;
  p.replace_extension(".json");
  return p;
}

void write_table(const std::filesystem::path& bin_path, const FloatTable& table,
                 const nlohmann::json& sidecar) {
  if (table.dim == 0 && !table.values.empty())
    throw std::invalid_argument("table with values must have dim > 0");
  if (!bin_path.parent_path().empty()) std::filesystem::create_directories(bin_path.parent_path());
  {
    std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + bin_path.string());
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kBinaryFormatVersion);
    put_le<std::uint32_t>(out, table.dim);
    put_le<std::uint64_t>(out, table.rows());
    put_le<std::uint64_t>(out, 0);
    for (float f : table.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      put_le<std::uint32_t>(out, bits);
    }
    if (!out) throw std::runtime_error("short write to " + bin_path.string());
  }
  write_text_file(sidecar_path(bin_path), sidecar.dump(1) + "\n");
}

FloatTable read_table(const std::filesystem::path& bin_path) {
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + bin_path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 32 || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw std::runtime_error(bin_path.string() + " is not an MLOSBIN1 file");
  const auto version = get_le<std::uint32_t>(bytes.data() + 8);
  if (version != kBinaryFormatVersion)
    throw std::runtime_error(bin_path.string() + " has unsupported format version " +
                             std::to_string(version));
  FloatTable table;
  table.dim = get_le<std::uint32_t>(bytes.data() + 12);
  const auto rows = get_le<std::uint64_t>(bytes.data() + 16);
  const std::uint64_t count = rows * table.dim;
  if (bytes.size() != 32 + 4 * count)
    throw std::runtime_error(bin_path.string() + " is truncated or has trailing bytes");
  table.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto bits = get_le<std::uint32_t>(bytes.data() + 32 + 4 * i);
    std::memcpy(&table.values[i], &bits, sizeof bits);
  }
  return table;
}

nlohmann::json read_sidecar(const std::filesystem::path& bin_path) {
  return nlohmann::json::parse(read_text_file(sidecar_path(bin_path)));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mlos
