// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synth, train, eval, actions, gradcheck, stats.
// Every run writes a JSON manifest; `--config <manifest>` replays it, with
// any flags given alongside overriding the recorded values.
//
// Exit codes: 0 success, 1 validation or usage error, 2 internal error.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gatefuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInternal = 2;

/// `args[0]` is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace gatefuse::cli
