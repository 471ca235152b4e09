#pragma once

// Command-line front end: subcommands spectral, simulate, lln, clt, fringe and
// martingales, each reading an experiment configuration and writing its
// report files into the output directory.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "cmj/config.hpp"

namespace cmj {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::optional<std::string> out;
  double aalpha_bias = 0.0;
};

/// Spectral report: alpha, beta, lattice span, roots in the strip and the A7 check.
std::string spectral_json(const ExperimentConfig& cfg);

/// Runs a subcommand against a loaded configuration; returns the exit code.
/// `log` receives a one-line summary.
int run_command(const std::string& command, const ExperimentConfig& cfg, const CliOptions& opts, std::ostream& log);

/// Parses argv, runs the subcommand and maps errors to exit codes
/// (0 success, 1 usage, 2 assumption violation, 3 unsupported regime,
/// 4 resource cap).
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace cmj
