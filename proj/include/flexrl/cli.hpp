#pragma once

namespace flexrl::cli {

/// Entry point for the flexrl command-line tool. Exit codes: 0 success,
/// 1 assertion/training failure, 2 usage or I/O error.
int run(int argc, const char* const* argv);

}  // namespace flexrl::cli
