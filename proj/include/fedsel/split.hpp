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

#pragma once

#include <cstdint>
#include <vector>

#include "fedsel/matrix.hpp"

namespace fedsel {

// A labelled set of samples. `ids` identify samples across the whole corpus so
// that disjointness between clients can be checked.
struct Split {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::uint64_t> ids;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  void append(std::span<const double> x, int label, std::uint64_t id);
  // Concatenates `other` onto this split; feature widths must agree.
  void extend(const Split& other);

  bool operator==(const Split&) const = default;
};

}  // namespace fedsel
