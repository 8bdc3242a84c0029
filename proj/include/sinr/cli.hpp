#pragma once

namespace sinr {

// Entry point for the `sinr` binary. Exit codes: 0 success, 1 runtime
// failure, 2 usage/state error, 3 embedder fingerprint mismatch.
int run_cli(int argc, const char* const* argv);

}  // namespace sinr
