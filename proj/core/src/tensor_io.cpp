/*
Copyright 2026 The msfk Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include "msfk/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

#include "msfk/error.hpp"

namespace msfk::io {

namespace {

constexpr std::array<char, 4> kTensorMagic = {'M', 'S', 'T', 'F'};
constexpr std::array<char, 4> kWeightsMagic = {'M', 'S', 'W', 'T'};
// Guards against absurd allocations from corrupt headers.
constexpr std::uint32_t kMaxRank = 16;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;
constexpr std::uint32_t kMaxNameLength = 4096;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in, const char* field) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw FormatError(std::string("truncated input while reading ") + field);
  }
  return std::uint32_t{bytes[0]} | (std::uint32_t{bytes[1]} << 8) | (std::uint32_t{bytes[2]} << 16) |
         (std::uint32_t{bytes[3]} << 24);
}

void expect_magic(std::istream& in, const std::array<char, 4>& magic) {
  std::array<char, 4> got{};
  if (!in.read(got.data(), 4)) throw FormatError("truncated input while reading magic");
  if (got != magic) {
    throw FormatError("bad magic: expected '" + std::string(magic.begin(), magic.end()) + "', got '" +
                      std::string(got.begin(), got.end()) + "'");
  }
}

void expect_version(std::istream& in) {
  std::uint32_t version = get_u32(in, "version");
  if (version != kFormatVersion) throw FormatError("unsupported version " + std::to_string(version));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& tensor) {
  out.write(kTensorMagic.data(), 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

Tensor read_tensor(std::istream& in) {
  expect_magic(in, kTensorMagic);
  expect_version(in);
  std::uint32_t ndim = get_u32(in, "ndim");
  if (ndim == 0 || ndim > kMaxRank) throw FormatError("invalid ndim " + std::to_string(ndim));
  Shape shape(ndim);
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    std::uint32_t d = get_u32(in, "dims");
    if (d == 0) throw FormatError("dims[" + std::to_string(i) + "] is zero");
    shape[i] = d;
    count *= d;
    if (count > kMaxElements) throw FormatError("dims describe more than 2^32 elements");
  }
  std::vector<float> data(count);
  for (auto& v : data) v = std::bit_cast<float>(get_u32(in, "data"));
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  auto out = open_out(path);
  write_tensor(out, tensor);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Tensor load_tensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tensor(in);
}

void WeightStore::insert(std::string name, Tensor tensor) {
  if (contains(name)) throw FormatError("duplicate tensor name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

bool WeightStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

const Tensor& WeightStore::at(const std::string& name) const {
  for (const auto& [key, tensor] : entries_) {
    if (key == name) return tensor;
  }
  throw FormatError("missing tensor '" + name + "'");
}

std::optional<Tensor> WeightStore::find(const std::string& name) const {
  for (const auto& [key, tensor] : entries_) {
    if (key == name) return tensor;
  }
  return std::nullopt;
}

void write_weights(std::ostream& out, const WeightStore& store) {
  out.write(kWeightsMagic.data(), 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, tensor] : store.entries()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(out, tensor);
  }
}

WeightStore read_weights(std::istream& in) {
  expect_magic(in, kWeightsMagic);
  expect_version(in);
  std::uint32_t count = get_u32(in, "count");
  WeightStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t len = get_u32(in, "name-length");
    if (len == 0 || len > kMaxNameLength) throw FormatError("invalid name-length " + std::to_string(len));
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError("truncated input while reading name");
    try {
      store.insert(name, read_tensor(in));
    } catch (const FormatError& e) {
      throw FormatError("entry '" + name + "': " + e.what());
    }
  }
  return store;
}

void save_weights(const std::filesystem::path& path, const WeightStore& store) {
  auto out = open_out(path);
  write_weights(out, store);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

WeightStore load_weights(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_weights(in);
}

}  // namespace msfk::io
