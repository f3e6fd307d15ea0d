#pragma once

namespace trenh {

/// Entry point of the `trenh` executable. Returns the process exit code:
/// 0 success, 1 runtime failure, 2 configuration or usage error,
/// 3 dataset error or dimension mismatch.
int run_cli(int argc, char** argv);

}  // namespace trenh
