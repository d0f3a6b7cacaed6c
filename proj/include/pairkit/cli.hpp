#pragma once

#include <string>
#include <vector>

namespace pairkit::cli {

/// Entry point for the `pairkit` command line; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace pairkit::cli
