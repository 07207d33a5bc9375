// Copyright 2026 The freeflyer Authors
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

#ifndef FREEFLYER_ERRORS_HPP_
#define FREEFLYER_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace freeflyer {

// Base of every error thrown by the library. The CLI maps ConfigError (and
// its subclasses) to exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (usually a dimension mismatch).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Euler-angle rate transform is singular (pitch at +-pi/2).
class SingularityError : public Error {
 public:
  using Error::Error;
};

// A factorization needed by the algorithm failed (non-SPD mass matrix etc.).
class SolveFailure : public Error {
 public:
  using Error::Error;
};

class NumericalOverflow : public Error {
 public:
  using Error::Error;
};

class DivergedRollout : public NumericalOverflow {
 public:
  using NumericalOverflow::NumericalOverflow;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `line` is 1-based, 0 when unknown.
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, int line, std::string field)
      : ConfigError(what), line_(line), field_(std::move(field)) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

class ValidationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace freeflyer

#endif  // FREEFLYER_ERRORS_HPP_
