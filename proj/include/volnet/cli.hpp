#pragma once

namespace volnet::cli {

// Full command-line entry point (subcommands: synth, compute-rv,
// estimate-graph, backtest, evaluate). Returns the process exit code:
// 0 ok, 2 config error, 3 data error, 4 numerical failure.
int run(int argc, const char* const* argv);

}  // namespace volnet::cli
