// Copyright 2026 The decoar authors.
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

#include "decoar/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace decoar {

namespace {

constexpr char kMagic[4] = {'D', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  put_u64(os, std::bit_cast<std::uint64_t>(v));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  return std::bit_cast<double>(get_u64(is));
}

[[noreturn]] void fail(const std::string& file, const std::string& why) {
  throw std::runtime_error("checkpoint '" + file + "': " + why);
}

}  // namespace

void save_checkpoint(
    const std::string& file,
    const std::vector<std::pair<std::string, Tensor>>& entries) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) fail(file, "cannot open for writing");
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u64(os, entries.size());
  for (const auto& [path, tensor] : entries) {
    put_u32(os, static_cast<std::uint32_t>(path.size()));
    os.write(path.data(), static_cast<std::streamsize>(path.size()));
    put_u32(os, static_cast<std::uint32_t>(tensor.ndim()));
    for (const std::size_t d : tensor.shape()) put_u64(os, d);
    for (const double v : tensor.value()) put_f64(os, v);
  }
  if (!os) fail(file, "write error");
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(
    const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) fail(file, "cannot open");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) fail(file, "bad magic");
  const std::uint32_t version = get_u32(is);
  if (version != kVersion) {
    fail(file, "unsupported version " + std::to_string(version));
  }
  const std::uint64_t count = get_u64(is);
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.reserve(count);
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::uint32_t path_len = get_u32(is);
    std::string path(path_len, '\0');
    is.read(path.data(), path_len);
    const std::uint32_t ndim = get_u32(is);
    Shape shape(ndim);
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      shape[i] = static_cast<std::size_t>(get_u64(is));
      n *= shape[i];
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = get_f64(is);
    if (!is) fail(file, "truncated while reading '" + path + "'");
    entries.emplace_back(std::move(path), Tensor(std::move(shape), std::move(values)));
  }
  return entries;
}

std::map<std::string, Tensor> load_checkpoint_map(const std::string& file) {
  std::map<std::string, Tensor> m;
  for (auto& [path, tensor] : load_checkpoint(file)) {
    m.emplace(std::move(path), std::move(tensor));
  }
  return m;
}

}  // namespace decoar
