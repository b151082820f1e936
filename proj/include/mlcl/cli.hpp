// Copyright 2026 The mlcl Authors.
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


// The `mlcl` command line. Every subcommand reads one JSON run config
// (--config), applies flag overrides, validates all paths, then writes its
// artifacts into --out. Artifacts carry no timestamps, so the same config
// and seed reproduce them byte for byte.

#ifndef MLCL_CLI_HPP_
#define MLCL_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace mlcl::cli {

// Returns the process exit code: 0 on success, 1 on a run error, 2 on a
// usage error. Messages go to `err`; reports go to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mlcl::cli

#endif  // MLCL_CLI_HPP_
