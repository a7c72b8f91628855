// Copyright 2026 The DQAD Authors. All rights reserved.
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

#ifndef DQAD_ERROR_HPP_
#define DQAD_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dqad {

enum class ErrorKind {
  kInput,            // malformed argument to an operation
  kConfig,           // invalid configuration
  kState,            // operation invoked in an invalid object state
  kParse,            // malformed file contents
  kValidation,       // dataset/manifest consistency failure
  kIo,               // filesystem failure
  kNumeric,          // non-finite values
  kUndefinedMetric,  // metric undefined for the given labels
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void Require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) Fail(kind, message);
}

}  // namespace dqad

#endif  // DQAD_ERROR_HPP_
