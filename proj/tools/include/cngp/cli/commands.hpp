#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cngp/cli/config.hpp"
#include "cngp/inference.hpp"

namespace cngp::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

/// Each command validates its configuration and paths before doing any
/// work, writes its outputs plus "<command>_manifest.txt" into output_dir
/// and returns the written paths.
std::vector<std::filesystem::path> cmd_simulate(const RunConfig &config);
std::vector<std::filesystem::path> cmd_features(const RunConfig &config);
std::vector<std::filesystem::path> cmd_train(const RunConfig &config);
std::vector<std::filesystem::path> cmd_predict(const RunConfig &config);
std::vector<std::filesystem::path> cmd_evaluate(const RunConfig &config);
/// Per-replication failures are recorded in the manifest; throws
/// NonFiniteObjective after writing partial results when any failed.
std::vector<std::filesystem::path> cmd_benchmark(const RunConfig &config);

std::vector<std::filesystem::path> run_command(const RunConfig &config);

/// Maps an exception to the documented exit status.
int exit_code_for(const std::exception &error);

/// Full command line: cngp <command> [--config FILE] [--set KEY=VALUE ...].
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

TrainConfig train_config_from(const RunConfig &config);
std::string trace_csv(const TrainTrace &trace);

} // namespace cngp::cli
