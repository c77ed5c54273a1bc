#include "cngp/cli/table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cngp/error.hpp"

namespace cngp::cli {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_cells(const std::string &line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cells.push_back(trim(cell));
  }
  if (!line.empty() && line.back() == ',') {
    cells.emplace_back();
  }
  return cells;
}

} // namespace

std::optional<std::size_t> Table::find(const std::string &name) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] == name) {
      return j;
    }
  }
  return std::nullopt;
}

std::size_t Table::require(const std::string &name) const {
  const auto j = find(name);
  if (!j) {
    throw MissingColumn("column '" + name + "' not found");
  }
  return *j;
}

std::vector<double> Table::numeric(const std::string &name) const {
  const std::size_t j = require(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto &row : rows) {
    const std::string &cell = row[j];
    double v = std::nan("");
    if (!cell.empty()) {
      const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size()) {
        v = std::nan("");
      }
    }
    out.push_back(v);
  }
  return out;
}

const std::vector<std::string> Table::text(const std::string &name) const {
  const std::size_t j = require(name);
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto &row : rows) {
    out.push_back(row[j]);
  }
  return out;
}

Table read_table(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "'");
  }
  Table t;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    auto cells = split_cells(line);
    if (t.columns.empty()) {
      t.columns = std::move(cells);
      continue;
    }
    if (cells.size() != t.columns.size()) {
      throw MalformedCsv("expected " + std::to_string(t.columns.size()) + " cells, found " +
                             std::to_string(cells.size()),
                         line_no);
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.columns.empty()) {
    throw MalformedCsv("missing header row", 1);
  }
  return t;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
  add(std::move(header));
}

void CsvWriter::add(std::vector<std::string> cells) {
  if (cells.size() != width_) {
    throw DimensionMismatch("CsvWriter: row width does not match the header");
  }
  for (std::size_t j = 0; j < cells.size(); ++j) {
    text_ += (j == 0 ? "" : ",") + cells[j];
  }
  text_ += '\n';
}

std::string CsvWriter::str() const { return text_; }

void CsvWriter::save(const std::filesystem::path &path) const { write_text(path, text_); }

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write '" + path.string() + "'");
  }
  out << text;
  if (!out) {
    throw DataError("write failed for '" + path.string() + "'");
  }
}

} // namespace cngp::cli
