#pragma once

namespace cmet {

// Entry point behind main(): parses argv, runs one subcommand, maps errors
// to exit codes (0 success, 1 domain error as "code: message" on stderr,
// 2 usage).
int dispatch(int argc, const char* const* argv);

}  // namespace cmet
