#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "beesense/error.hpp"
#include "experiment.hpp"

namespace beesense::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Config, parameter and model-version problems are validation failures;
/// everything else that goes wrong while working is a runtime failure.
int exit_code_for(ErrorKind kind);

std::vector<std::string> command_names();

/// Runs one subcommand. Every command validates its whole config before
/// touching the output directory, then holds `<output>/.beesense.lock`
/// while it works. Returns the exit code; library errors propagate.
int run_command(const std::string& command, const ExperimentConfig& config, std::ostream& log);

}  // namespace beesense::cli
