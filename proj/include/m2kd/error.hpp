// Copyright 2026 The M2KD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace m2kd {

// Base of every error the core library throws. The C API maps the concrete
// subclass onto an m2kd_status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or precondition violation on a numeric operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid or unknown configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File access failed.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed binary input (IDX files, serialized stores).
class FormatError : public Error {
 public:
  using Error::Error;
};

// The masked store has no free weights left in some layer.
class StoreExhausted : public Error {
 public:
  using Error::Error;
};

}  // namespace m2kd
