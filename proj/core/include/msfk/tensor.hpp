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

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace msfk {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

/// Dense row-major float32 array. Immutable once constructed; every
/// operation returns a new tensor.
class Tensor {
 public:
  /// A single zero; placeholder for aggregates filled in later.
  Tensor() : shape_{1}, data_{0.0F} {}

  /// Throws DimensionError if the shape is empty, contains a zero, or does
  /// not match data.size().
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, float value);
  /// Row-major 2-D literal; every row must have the same length.
  static Tensor matrix(std::initializer_list<std::initializer_list<float>> rows);
  static Tensor vector(std::initializer_list<float> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const float> data() const noexcept { return data_; }

  /// Matrix view helpers; throw DimensionError unless rank() == 2.
  std::size_t rows() const;
  std::size_t cols() const;
  float at(std::size_t r, std::size_t c) const;
  std::span<const float> row(std::size_t r) const;

  float operator[](std::size_t i) const { return data_[i]; }

  /// Same data, new shape; element counts must agree.
  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

}  // namespace msfk
