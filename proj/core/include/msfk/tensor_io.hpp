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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "msfk/tensor.hpp"

/// Binary fixture formats.
///
/// MSTF record (all integers little-endian u32):
///   "MSTF" | version=1 | ndim | dims[ndim] | f32 data, row-major
///
/// MSWT container:
///   "MSWT" | version=1 | count | count × (name_len | UTF-8 name | MSTF record)
namespace msfk::io {

inline constexpr std::uint32_t kFormatVersion = 1;

void write_tensor(std::ostream& out, const Tensor& tensor);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_tensor(const std::filesystem::path& path);

/// Named tensors in file order. Names are unique.
class WeightStore {
 public:
  void insert(std::string name, Tensor tensor);

  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  std::optional<Tensor> find(const std::string& name) const;

  const std::vector<std::pair<std::string, Tensor>>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

void write_weights(std::ostream& out, const WeightStore& store);
WeightStore read_weights(std::istream& in);

void save_weights(const std::filesystem::path& path, const WeightStore& store);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace msfk::io
