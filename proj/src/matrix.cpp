// Copyright 2026 The fedsel Authors. All Rights Reserved.
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

#include "fedsel/matrix.hpp"

#include "fedsel/error.hpp"
#include "fedsel/split.hpp"

namespace fedsel {

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) {
    throw ShapeError("append_row: row has " + std::to_string(values.size()) +
                     " entries, matrix has " + std::to_string(cols_) + " columns");
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

void Split::append(std::span<const double> x, int label, std::uint64_t id) {
  features.append_row(x);
  labels.push_back(label);
  ids.push_back(id);
}

void Split::extend(const Split& other) {
  for (std::size_t i = 0; i < other.size(); ++i) {
    append(other.features.row(i), other.labels[i], other.ids[i]);
  }
}

}  // namespace fedsel
