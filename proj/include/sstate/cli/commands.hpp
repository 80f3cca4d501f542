#pragma once

#include <string>
#include <vector>

#include "sstate/cli/config.hpp"

namespace sstate::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Process exit codes.
enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_compute = 3 };

/// Each command reads its own section of the config and writes to
/// `<out>/<command>/`. Errors propagate as exceptions; `run` maps them to exit codes.
void cmd_ingest(const RunConfig& config);
void cmd_decompose(const RunConfig& config);
void cmd_common(const RunConfig& config);
void cmd_msar(const RunConfig& config);
void cmd_spectrum(const RunConfig& config);
void cmd_fetch(const RunConfig& config);
/// Synthetic fixtures (grid, msar, cosine, panel).
void cmd_synth(const RunConfig& config);

/// Exit code for the exception currently being handled.
int exit_code_for_current_exception();

/// Full command line: `sstate <command> --config <path> [--seed N] [--offline]
/// [--workers N] [--out DIR]`. Messages go to stdout/stderr.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace sstate::cli
