#include "common.hpp"

#include <cmath>

#include "cngp/cli/table.hpp"
#include "cngp/data.hpp"

namespace cngp::cli::detail {

std::filesystem::path prepare_output_dir(const RunConfig &config) {
  const auto dir = config.get_path("output_dir");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("cannot create output_dir '" + dir.string() + "'");
  }
  return dir;
}

std::filesystem::path existing_input(const RunConfig &config, const std::string &key) {
  if (!config.has(key)) {
    throw ConfigError("key '" + key + "' is required");
  }
  const auto path = config.get_path(key);
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError("key '" + key + "': no such file '" + path.string() + "'");
  }
  return path;
}

std::filesystem::path output_path(const RunConfig &config, const std::string &key,
                                  const std::string &fallback) {
  if (config.has(key)) {
    return config.get_path(key);
  }
  return config.get_path("output_dir") / fallback;
}

std::filesystem::path write_manifest(const RunConfig &config,
                                     const std::vector<std::pair<std::string, std::string>> &entries) {
  std::string text = "command = " + config.command() + "\n";
  text += "[config]\n" + config.echo() + "[results]\n";
  for (const auto &[k, v] : entries) {
    text += k + " = " + v + "\n";
  }
  const auto path = config.get_path("output_dir") / (config.command() + "_manifest.txt");
  write_text(path, text);
  return path;
}

std::string fmt(double value) { return std::isfinite(value) ? format_double(value) : ""; }

} // namespace cngp::cli::detail
