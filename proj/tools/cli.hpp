#pragma once

#include <ostream>
#include <span>
#include <string>

namespace mbsa::cli
{

/// Exit codes: the analysis ran and the property holds (or the artifact was
/// produced), the analysis ran and the property fails, bad usage or input.
enum ExitCode : int { ok = 0, property_fails = 1, usage_error = 2 };

/// Runs one subcommand. `args` excludes the program name. Reports go to
/// `out` unless --out names a file; diagnostics go to `err`.
int run( std::span< const std::string > args, std::ostream& out, std::ostream& err );

} // namespace mbsa::cli
