// Copyright 2026 The afcdepth Authors
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

#ifndef AFC_ERRORS_HPP
#define AFC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace afc {

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Requested problem size exceeds what the dense oracles are allowed to build.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Iterative computation failed to converge.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The (P1, P2) constraints cannot be met by any state of the block family.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Measured contrast exceeds what any state is capable of.
class InconsistentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Echo fit did not find a statistically significant peak.
class LowSignalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration or input file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace afc

#endif  // AFC_ERRORS_HPP
