#pragma once

#include <iosfwd>

namespace decotr::cli {

enum ExitCode : int {
  kSuccess = 0,
  kInputError = 1,      // bad flags, config, files or shapes
  kNumericalError = 2,  // non-finite loss or a failed self-check
};

/// Entry point of the `decotr` binary: synth, train, eval, complete and
/// gradcheck subcommands.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace decotr::cli
