// Copyright 2026 The DQAD Authors. All rights reserved.
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

#ifndef DQAD_MATRIX_HPP_
#define DQAD_MATRIX_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "dqad/error.hpp"

namespace dqad {

// Dense row-major float matrix used for feature pools and embedding caches.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<float> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

  // Appends a row. The first row fixes the column count of an empty matrix.
  void push_back(std::span<const float> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    Require(values.size() == cols_, ErrorKind::kInput,
            "FeatureMatrix row has wrong dimension");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  void reserve(std::size_t rows) { data_.reserve(rows * cols_); }

  void clear() {
    rows_ = 0;
    data_.clear();
  }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

}  // namespace dqad

#endif  // DQAD_MATRIX_HPP_
