#pragma once

// Command dispatch for configuration-driven experiments.

#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "sdepca/config.hpp"

namespace sdepca {

inline constexpr const char* kVersion = "1.0.0";

struct RunOptions {
  /// Worker threads for Monte-Carlo paths. Outputs do not depend on it.
  int threads = 1;
};

struct ReportBundle {
  std::filesystem::path directory;
  /// CSV files written, in emission order. The manifest is written last.
  std::vector<std::filesystem::path> files;
  std::filesystem::path manifest;
  std::string config_hash;
};

/// Validates the config, runs its command, and writes the CSV files plus
/// manifest.json into config.output.dir (created if missing).
///
/// A failing certificate is a result, not an error. Diverged simulations
/// still write their reports and then throw DivergedError.
ReportBundle run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Process exit code for an exception escaping run_experiment:
/// validation 2, diverged 3, insufficient data 4, no certificate 5, other 1.
int exit_code_for(const std::exception& e);

}  // namespace sdepca
