#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mcdrop::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitConfig = 2,      // bad flags, config file or parameter values
    kExitIo = 3,          // missing input, unwritable output
    kExitFormat = 4,      // malformed CSV / JSON / model, shape mismatch
    kExitDivergence = 5,  // training produced a non-finite loss
    kExitReplay = 6,      // replayed run does not match its manifest
    kExitNumeric = 7,     // singular scatter in LDA
};

// Runs one command line; args excludes the program name. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline constexpr const char* kVersion = "0.3.0";

}  // namespace mcdrop::cli
