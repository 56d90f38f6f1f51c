#pragma once

#include <iosfwd>

namespace ganblend::cli {

// Entry point of the `ganblend` tool. Returns the process exit code; failures
// are reported on `err` as a single "error: ..." line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ganblend::cli
