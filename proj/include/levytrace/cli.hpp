#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace levytrace {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_numerical = 3, exit_verdict = 4 };

/// levytrace <psi|renewal|density|remainder|ch|trace|verify> --config PATH [flags].
/// CSV artifacts go to the output directory; the human-readable summary to
/// `out`, progress and errors to `err`. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace levytrace
