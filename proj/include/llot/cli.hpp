#pragma once

#include <iosfwd>

namespace llot::cli {

/// Runs the `llot` command line. Returns 0 on success, 1 on validation errors and usage
/// problems, 2 on numerical failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace llot::cli
