#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cngp/cli/config.hpp"

namespace cngp::cli::detail {

using Paths = std::vector<std::filesystem::path>;

/// Creates output_dir (ConfigError on failure) and returns it.
std::filesystem::path prepare_output_dir(const RunConfig &config);

/// Requires a non-empty path key naming an existing file.
std::filesystem::path existing_input(const RunConfig &config, const std::string &key);

/// Value of a path key, or output_dir / fallback when unset.
std::filesystem::path output_path(const RunConfig &config, const std::string &key,
                                  const std::string &fallback);

/// Writes "<command>_manifest.txt": the resolved configuration followed by
/// command-specific entries.
std::filesystem::path write_manifest(const RunConfig &config,
                                     const std::vector<std::pair<std::string, std::string>> &entries);

std::string fmt(double value);

} // namespace cngp::cli::detail
