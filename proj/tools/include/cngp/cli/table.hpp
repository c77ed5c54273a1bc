#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cngp::cli {

/// Text CSV table kept as strings; used for files with mixed columns
/// (predictions, raw time series).
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find(const std::string &name) const;
  std::size_t require(const std::string &name) const;
  /// Numeric column; empty or non-numeric cells become NaN.
  std::vector<double> numeric(const std::string &name) const;
  const std::vector<std::string> text(const std::string &name) const;
};

Table read_table(const std::filesystem::path &path);

/// Writes rows of already-formatted cells.
class CsvWriter {
public:
  explicit CsvWriter(std::vector<std::string> header);
  void add(std::vector<std::string> cells);
  std::string str() const;
  void save(const std::filesystem::path &path) const;

private:
  std::string text_;
  std::size_t width_;
};

/// Writes text to a file, throwing DataError on failure.
void write_text(const std::filesystem::path &path, const std::string &text);

} // namespace cngp::cli
