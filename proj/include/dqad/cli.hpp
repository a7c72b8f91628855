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

#ifndef DQAD_CLI_HPP_
#define DQAD_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "dqad/error.hpp"

namespace dqad::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

int ExitCodeFor(ErrorKind kind);

// Entry point of the `dqad` tool. args[0] is the program name.
//   synth | validate | train | score | eval
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dqad::cli

#endif  // DQAD_CLI_HPP_
