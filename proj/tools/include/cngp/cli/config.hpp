#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cngp/error.hpp"

namespace cngp::cli {

/// Invalid, unknown or missing configuration. Maps to exit status 2.
class ConfigError : public Error {
public:
  using Error::Error;
};

enum class ValueType { String, Path, Integer, Real, Boolean, List };

struct KeySpec {
  std::string name;
  ValueType type = ValueType::String;
  std::string default_value;
  std::string help;
};

/// Resolved key-value configuration for one subcommand. Values are kept as
/// text and converted on access; every key has a schema entry so unknown
/// keys and ill-typed values are rejected up front.
class RunConfig {
public:
  RunConfig(std::string command, std::vector<KeySpec> schema);

  /// Flat "key = value" lines; '#' starts a comment.
  void merge_file(const std::filesystem::path &path);
  void merge_text(std::string_view text, std::string_view origin = "config");
  /// "key=value"
  void set(std::string_view assignment);
  void set(const std::string &key, const std::string &value);

  const std::string &command() const { return command_; }
  bool has(const std::string &key) const;
  std::string get_string(const std::string &key) const;
  std::filesystem::path get_path(const std::string &key) const;
  std::int64_t get_int(const std::string &key) const;
  double get_real(const std::string &key) const;
  bool get_bool(const std::string &key) const;
  std::vector<std::string> get_list(const std::string &key) const;
  std::vector<double> get_real_list(const std::string &key) const;

  /// Sorted "key = value" lines of the resolved configuration.
  std::string echo() const;
  const std::vector<KeySpec> &schema() const { return schema_; }

private:
  const KeySpec &spec_for(const std::string &key) const;
  void check_type(const KeySpec &spec, const std::string &value) const;

  std::string command_;
  std::vector<KeySpec> schema_;
  std::map<std::string, std::string> values_;
};

std::vector<KeySpec> schema_for(std::string_view command);
RunConfig make_config(std::string_view command);

} // namespace cngp::cli
