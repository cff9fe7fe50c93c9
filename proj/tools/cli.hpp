// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 1 runtime failure,
// 2 configuration or input error, 3 I/O error.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fishrope::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kConfig = 2, kIo = 3 };

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fishrope::cli
