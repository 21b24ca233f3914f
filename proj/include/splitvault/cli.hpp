// Copyright 2026 The Splitvault Authors
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

#include <iosfwd>

#include "splitvault/error.hpp"

namespace splitvault::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Process exit code for an operation error: 2 for UsageError, otherwise
/// 10 + the code's position in ErrorCode. Codes are stable across releases.
int exit_code(ErrorCode code);

/// Entry point of the `splitvault` binary. Errors go to `err` as one line
/// `error code=<NAME> exit=<n> message=<text>` (or a JSON object with --json).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace splitvault::cli
