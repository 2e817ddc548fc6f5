#pragma once

#include <iosfwd>

namespace kldro::cli {

enum ExitCode : int {
    kOk = 0,
    kValidationFailure = 1,
    kUsageError = 2,
    kNumericFailure = 3,
};

/// Entry point of the kldro tool, with the streams injected so tests can drive it.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kldro::cli
