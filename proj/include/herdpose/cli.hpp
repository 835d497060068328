#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace herdpose::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,      // unexpected internal error
    kUsage = 2,        // unknown subcommand or flag, bad flag value
    kIo = 3,           // missing or unwritable file
    kParse = 4,        // malformed JSON
    kValidation = 5,   // input violates the schema or a domain invariant
};

/// Worker count from HERDPOSE_WORKERS, else the hardware concurrency.
int default_workers();

/// Executes exactly one subcommand. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace herdpose::cli
