#pragma once
// Command-line surface: synth, validate, evaluate, rank, report.
// Exit codes: 0 success, 1 data/validation error, 2 usage error.

#include <ostream>
#include <string>
#include <vector>

namespace vinispec::cli {

/// Runs one command. args excludes the program name. All normal output goes
/// to out, every diagnostic to err; nothing touches global streams.
int execute(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

} // namespace vinispec::cli
