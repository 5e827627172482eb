// Copyright 2026 The Hybridize Authors
// SPDX-License-Identifier: Apache-2.0
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

#ifndef HYBRIDIZE_TOOLS_CLI_H_
#define HYBRIDIZE_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace hybridize::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kBadConfig = 2,
  kDiverged = 3,
  kIo = 4,
  kInfeasible = 5,
  kMissingCheckpoint = 6,
};

// Runs one subcommand. args[0] is the program name. Data goes to `out`,
// diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace hybridize::cli

#endif  // HYBRIDIZE_TOOLS_CLI_H_
