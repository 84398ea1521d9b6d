// Copyright 2026 The streamgcd Authors.
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

#ifndef STREAMGCD_ERRORS_H_
#define STREAMGCD_ERRORS_H_

#include <stdexcept>
#include <string>

namespace streamgcd {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (empty input,
// negative standard deviation, non-finite value).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid caller-supplied data (n < 2 for a mixture fit, out-of-range label).
class InputError : public Error {
 public:
  using Error::Error;
};

// Data that is well-formed but carries no information to split on.
class DegenerateInputError : public InputError {
 public:
  using InputError::InputError;
};

// Bad configuration: invalid spec fields, duplicate adapters, bad layer index.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed file content. The message names the offending line.
class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Numerical failure during training (NaN loss or gradient).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// An internal contract between pipeline stages was broken.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace streamgcd

#endif  // STREAMGCD_ERRORS_H_
