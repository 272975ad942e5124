// Copyright 2026 The GPDP Authors
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

#ifndef GPDP_ERRORS_H_
#define GPDP_ERRORS_H_

#include <stdexcept>
#include <string>

namespace gpdp {

// Precondition or shape violation on a public entry point.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical quantity (gradient, loss) came out NaN or infinite.
class NonFiniteError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Failure to open, read, write, or decode a file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Kernel matrix could not be factorized even after jitter escalation.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Environment reached a non-finite state.
class EnvironmentFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A training stage produced a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::string stage, long step)
      : std::runtime_error("non-finite loss in stage '" + stage +
                           "' at step " + std::to_string(step)),
        stage_(std::move(stage)),
        step_(step) {}

  const std::string& stage() const { return stage_; }
  long step() const { return step_; }

 private:
  std::string stage_;
  long step_;
};

// Policy bundle is missing a stage or a file.
class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gpdp

#endif  // GPDP_ERRORS_H_
