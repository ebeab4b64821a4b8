#pragma once

#include <iosfwd>

namespace edgeslice {

/// Entry point of the `edgeslice` tool. Returns the process exit status;
/// diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace edgeslice
