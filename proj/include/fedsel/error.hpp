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

#include <stdexcept>
#include <string>

namespace fedsel {

// Error categories surfaced by the library. The CLI maps each to an exit code.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid specification or configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dimension or manifest mismatch between arrays that must agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Empty splits, out-of-range labels, malformed data files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Violations of the federation round protocol (empty update sets, failed clients).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedsel
