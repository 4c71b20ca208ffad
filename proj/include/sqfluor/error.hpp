// Copyright 2026 The sqfluor Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sqfluor {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter set violates a physical constraint (e.g. |M| > sqrt(N(N+1))).
class PhysicalityError : public Error {
 public:
  using Error::Error;
};

/// Two or more roots of D(s) coincide to within the degeneracy threshold, so the
/// partial-fraction coefficients C_j are not defined.
class DegenerateRootsError : public Error {
 public:
  DegenerateRootsError(const std::string& what, double min_separation)
      : Error(what), min_separation_(min_separation) {}
  double min_separation() const noexcept { return min_separation_; }

 private:
  double min_separation_;
};

/// The brute-force integrator drifted off the space of density matrices.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// Numerical procedure could not be completed (tail fit, degenerate data, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed trace file. `line()` is 1-based; 0 when the error is not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Job configuration failed validation; carries every offending key.
class SchemaError : public Error {
 public:
  explicit SchemaError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid job configuration:";
    for (const auto& item : items) out += "\n  - " + item;
    return out;
  }
  std::vector<std::string> problems_;
};

}  // namespace sqfluor
