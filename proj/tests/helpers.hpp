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

#include "fedsel/rng.hpp"
#include "fedsel/split.hpp"

namespace fedsel::testing {

inline Split random_split(std::size_t n, std::size_t dim, int classes, std::uint64_t seed) {
  Rng rng(seed);
  Split s;
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : x) v = rng.normal();
    s.append(x, static_cast<int>(rng.index(static_cast<std::size_t>(classes))), i);
  }
  return s;
}

}  // namespace fedsel::testing
