#include "cngp/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cngp/error.hpp"
#include "cngp/rng.hpp"

namespace cngp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      return cells;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::optional<double> parse_number(std::string_view cell) {
  if (cell.empty()) {
    return std::nullopt;
  }
  if (cell.front() == '+') {
    cell.remove_prefix(1);
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

int parse_fixed(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos + len > text.size()) {
    throw InvalidArgument("timestamp: truncated");
  }
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
  if (ec != std::errc() || ptr != text.data() + pos + len) {
    throw InvalidArgument("timestamp: expected digits in '" + std::string(text) + "'");
  }
  return value;
}

} // namespace

std::string_view to_string(SplitLabel label) {
  switch (label) {
  case SplitLabel::Train:
    return "train";
  case SplitLabel::Validation:
    return "validation";
  case SplitLabel::Test:
    return "test";
  }
  return "train";
}

SplitLabel parse_split_label(std::string_view name) {
  if (name == "train") {
    return SplitLabel::Train;
  }
  if (name == "validation" || name == "valid" || name == "val") {
    return SplitLabel::Validation;
  }
  if (name == "test") {
    return SplitLabel::Test;
  }
  throw InvalidArgument("unknown split label '" + std::string(name) + "'");
}

void Dataset::validate() const {
  if (rows() < 1) {
    throw DataTooSmall("dataset has no rows");
  }
  if (target.size() != rows() || static_cast<Eigen::Index>(feature_names.size()) != cols()) {
    throw DimensionMismatch("dataset: features, target and names disagree in size");
  }
  if (!split.empty() && static_cast<Eigen::Index>(split.size()) != rows()) {
    throw DimensionMismatch("dataset: split labels do not match rows");
  }
  if (!timestamps.empty() && static_cast<Eigen::Index>(timestamps.size()) != rows()) {
    throw DimensionMismatch("dataset: timestamps do not match rows");
  }
  for (const auto &[name, column] : extra) {
    if (column.size() != rows()) {
      throw DimensionMismatch("dataset: side column '" + name + "' does not match rows");
    }
  }
  if (!features.allFinite() || !target.allFinite()) {
    throw DataError("dataset: non-finite feature or target value");
  }
  std::set<std::string> names(feature_names.begin(), feature_names.end());
  if (names.size() != feature_names.size() || names.count(target_name) != 0) {
    throw DataError("dataset: column names must be unique");
  }
}

Dataset Dataset::subset(const std::vector<Eigen::Index> &idx) const {
  Dataset out;
  out.feature_names = feature_names;
  out.target_name = target_name;
  const auto k = static_cast<Eigen::Index>(idx.size());
  out.features.resize(k, cols());
  out.target.resize(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const Eigen::Index i = idx[static_cast<std::size_t>(r)];
    if (i < 0 || i >= rows()) {
      throw InvalidArgument("dataset subset: row index out of range");
    }
    out.features.row(r) = features.row(i);
    out.target(r) = target(i);
    if (!split.empty()) {
      out.split.push_back(split[static_cast<std::size_t>(i)]);
    }
    if (!timestamps.empty()) {
      out.timestamps.push_back(timestamps[static_cast<std::size_t>(i)]);
    }
  }
  for (const auto &[name, column] : extra) {
    Eigen::VectorXd c(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      c(r) = column(idx[static_cast<std::size_t>(r)]);
    }
    out.extra.emplace(name, std::move(c));
  }
  return out;
}

std::vector<Eigen::Index> Dataset::rows_with(SplitLabel label) const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < rows(); ++i) {
    const bool match =
        split.empty() ? label == SplitLabel::Train : split[static_cast<std::size_t>(i)] == label;
    if (match) {
      idx.push_back(i);
    }
  }
  return idx;
}

Dataset Dataset::subset(SplitLabel label) const { return subset(rows_with(label)); }

// ---------------------------------------------------------------------------

std::int64_t parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  text = trim(text);
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    throw InvalidArgument("timestamp: expected YYYY-MM-DDTHH:MM:SS, got '" + std::string(text) + "'");
  }
  const year_month_day date{year{parse_fixed(text, 0, 4)},
                            month{static_cast<unsigned>(parse_fixed(text, 5, 2))},
                            day{static_cast<unsigned>(parse_fixed(text, 8, 2))}};
  const int hh = parse_fixed(text, 11, 2);
  const int mm = parse_fixed(text, 14, 2);
  const int ss = parse_fixed(text, 17, 2);
  if (!date.ok() || hh > 23 || mm > 59 || ss > 60) {
    throw InvalidArgument("timestamp: out-of-range field in '" + std::string(text) + "'");
  }
  std::string_view rest = text.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    std::size_t k = 1;
    while (k < rest.size() && rest[k] >= '0' && rest[k] <= '9') {
      ++k;
    }
    rest.remove_prefix(k);
  }
  if (!(rest.empty() || rest == "Z" || rest == "+00:00")) {
    throw InvalidArgument("timestamp: only UTC is supported, got '" + std::string(text) + "'");
  }
  const auto days = sys_days{date}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_iso8601(std::int64_t seconds) {
  using namespace std::chrono;
  std::int64_t days = seconds / 86400;
  std::int64_t rem = seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const year_month_day date{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                static_cast<int>(rem / 3600), static_cast<int>((rem / 60) % 60),
                static_cast<int>(rem % 60));
  return buf;
}

int year_of(std::int64_t seconds) {
  using namespace std::chrono;
  std::int64_t days = seconds / 86400;
  if (seconds % 86400 < 0) {
    --days;
  }
  return static_cast<int>(year_month_day{sys_days{std::chrono::days{days}}}.year());
}

std::int64_t year_start(int y) {
  using namespace std::chrono;
  const sys_days d{year{y} / January / 1};
  return static_cast<std::int64_t>(d.time_since_epoch().count()) * 86400;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) {
    throw InvalidArgument("format_double: conversion failed");
  }
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------

CsvLoadResult parse_csv(std::string_view text, const CsvLoadOptions &options) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) {
        end = text.size();
      }
      lines.push_back(text.substr(start, end - start));
      start = end + 1;
    }
  }
  if (!lines.empty() && lines.front().substr(0, 3) == "\xEF\xBB\xBF") {
    lines.front().remove_prefix(3);
  }
  if (lines.empty() || trim(lines.front()).empty()) {
    throw MalformedCsv("csv: missing header row", 1);
  }
  const auto header = split_line(lines.front());
  std::map<std::string, std::size_t, std::less<>> column_index;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j].empty()) {
      throw MalformedCsv("csv: empty column name", 1);
    }
    if (!column_index.emplace(std::string(header[j]), j).second) {
      throw MalformedCsv("csv: duplicate column '" + std::string(header[j]) + "'", 1);
    }
  }
  auto require = [&](const std::string &name) {
    const auto it = column_index.find(name);
    if (it == column_index.end()) {
      throw MissingColumn("csv: column '" + name + "' not found");
    }
    return it->second;
  };

  constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
  const bool has_target = options.require_target || column_index.count(options.target_column) != 0;
  const std::size_t target_idx = has_target ? require(options.target_column) : kAbsent;
  const auto ts_it = column_index.find(options.timestamp_column);
  const std::size_t ts_idx = ts_it == column_index.end() ? kAbsent : ts_it->second;
  const auto split_it = column_index.find(options.split_column);
  const std::size_t split_idx = split_it == column_index.end() ? kAbsent : split_it->second;
  std::vector<std::size_t> carry_idx;
  std::vector<std::string> carry_names;
  for (const auto &name : options.carry_columns) {
    carry_idx.push_back(require(name));
    carry_names.push_back(name);
  }
  for (const auto &name : options.optional_carry_columns) {
    const auto it = column_index.find(name);
    if (it != column_index.end() &&
        std::find(carry_names.begin(), carry_names.end(), name) == carry_names.end()) {
      carry_idx.push_back(it->second);
      carry_names.push_back(name);
    }
  }
  std::vector<std::string> feature_names = options.feature_columns;
  if (feature_names.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      const bool reserved = j == target_idx || j == ts_idx || j == split_idx ||
                            std::find(carry_idx.begin(), carry_idx.end(), j) != carry_idx.end();
      if (!reserved) {
        feature_names.emplace_back(header[j]);
      }
    }
  }
  std::vector<std::size_t> feature_idx;
  for (const auto &name : feature_names) {
    feature_idx.push_back(require(name));
  }

  std::vector<double> values;
  std::vector<double> targets;
  std::vector<std::vector<double>> carried(carry_idx.size());
  Dataset ds;
  std::size_t dropped = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string_view line = trim(lines[li]);
    if (line.empty()) {
      continue;
    }
    const auto cells = split_line(line);
    const long line_no = static_cast<long>(li) + 1;
    if (cells.size() != header.size()) {
      throw MalformedCsv("csv: expected " + std::to_string(header.size()) + " cells, found " +
                             std::to_string(cells.size()),
                         line_no);
    }
    bool keep = true;
    std::vector<double> row(feature_idx.size());
    for (std::size_t k = 0; k < feature_idx.size() && keep; ++k) {
      const auto v = parse_number(cells[feature_idx[k]]);
      keep = v.has_value();
      row[k] = v.value_or(0.0);
    }
    const auto y = has_target ? parse_number(cells[target_idx]) : std::optional<double>(0.0);
    keep = keep && y.has_value();
    if (!keep) {
      ++dropped;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
    targets.push_back(*y);
    for (std::size_t k = 0; k < carry_idx.size(); ++k) {
      carried[k].push_back(parse_number(cells[carry_idx[k]]).value_or(std::nan("")));
    }
    if (ts_idx != kAbsent) {
      try {
        ds.timestamps.push_back(parse_iso8601(cells[ts_idx]));
      } catch (const InvalidArgument &e) {
        throw MalformedCsv(e.what(), line_no);
      }
    }
    if (split_idx != kAbsent) {
      try {
        ds.split.push_back(parse_split_label(cells[split_idx]));
      } catch (const InvalidArgument &e) {
        throw MalformedCsv(e.what(), line_no);
      }
    }
  }
  if (targets.empty()) {
    throw EmptyAfterFiltering("csv: no complete rows remain after dropping missing values");
  }
  const auto n = static_cast<Eigen::Index>(targets.size());
  const auto p = static_cast<Eigen::Index>(feature_idx.size());
  ds.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, p);
  ds.target = Eigen::Map<const Eigen::VectorXd>(targets.data(), n);
  ds.feature_names = feature_names;
  ds.target_name = has_target ? options.target_column : std::string();
  for (std::size_t k = 0; k < carry_idx.size(); ++k) {
    ds.extra.emplace(carry_names[k], Eigen::Map<const Eigen::VectorXd>(carried[k].data(), n));
  }
  ds.validate();
  return {std::move(ds), dropped};
}

CsvLoadResult load_csv(const std::filesystem::path &path, const CsvLoadOptions &options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), options);
}

std::string format_csv(const Dataset &ds) {
  ds.validate();
  std::string out;
  const bool has_ts = !ds.timestamps.empty();
  const bool has_split = !ds.split.empty();
  std::vector<std::string> header;
  if (has_ts) {
    header.emplace_back("timestamp");
  }
  header.insert(header.end(), ds.feature_names.begin(), ds.feature_names.end());
  header.push_back(ds.target_name);
  for (const auto &[name, column] : ds.extra) {
    header.push_back(name);
  }
  if (has_split) {
    header.emplace_back("split");
  }
  for (std::size_t j = 0; j < header.size(); ++j) {
    out += (j == 0 ? "" : ",") + header[j];
  }
  out += '\n';
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    std::string line;
    if (has_ts) {
      line += format_iso8601(ds.timestamps[static_cast<std::size_t>(i)]) + ",";
    }
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
      line += format_double(ds.features(i, j)) + ",";
    }
    line += format_double(ds.target(i));
    for (const auto &[name, column] : ds.extra) {
      line += ",";
      if (std::isfinite(column(i))) {
        line += format_double(column(i));
      }
    }
    if (has_split) {
      line += ",";
      line += to_string(ds.split[static_cast<std::size_t>(i)]);
    }
    out += line + '\n';
  }
  return out;
}

void save_csv(const std::filesystem::path &path, const Dataset &ds) {
  const std::string text = format_csv(ds);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write '" + path.string() + "'");
  }
  out << text;
  if (!out) {
    throw DataError("write failed for '" + path.string() + "'");
  }
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd &features) const {
  if (features.cols() != means.size()) {
    throw DimensionMismatch("standardizer: column count mismatch");
  }
  return (features.rowwise() - means.transpose()).array().rowwise() / sds.transpose().array();
}

Dataset Standardizer::apply(const Dataset &ds) const {
  Dataset out = ds;
  out.features = apply(ds.features);
  return out;
}

Standardizer fit_standardizer(const Dataset &ds) {
  const auto rows = ds.rows_with(SplitLabel::Train);
  if (rows.size() < 2) {
    throw DataTooSmall("standardizer: at least two training rows required");
  }
  const Dataset train = ds.subset(rows);
  Standardizer s;
  s.means = train.features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = train.features.rowwise() - s.means.transpose();
  s.sds = (centered.colwise().squaredNorm() / static_cast<double>(train.rows() - 1))
              .cwiseSqrt()
              .transpose();
  for (Eigen::Index j = 0; j < s.sds.size(); ++j) {
    if (!(s.sds(j) > 0.0)) {
      throw ConstantColumn("standardizer: column '" + ds.feature_names[static_cast<std::size_t>(j)] +
                           "' is constant on the training rows");
    }
  }
  return s;
}

Dataset apply_standardizer(const Standardizer &standardizer, const Dataset &ds) {
  return standardizer.apply(ds);
}

Dataset split_dataset(const Dataset &ds, const SplitFractions &f, std::uint64_t seed) {
  const double total = f.train + f.validation + f.test;
  if (f.train < 0.0 || f.validation < 0.0 || f.test < 0.0 || std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("split_dataset: fractions must be nonnegative and sum to 1");
  }
  const Eigen::Index n = ds.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    order[static_cast<std::size_t>(i)] = i;
  }
  Rng rng(seed, Stream::Split);
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto n_val = std::min(order.size() - std::min(order.size(), n_train),
                              static_cast<std::size_t>(std::llround(f.validation * static_cast<double>(n))));
  Dataset out = ds;
  out.split.assign(static_cast<std::size_t>(n), SplitLabel::Test);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto i = static_cast<std::size_t>(order[k]);
    if (k < n_train) {
      out.split[i] = SplitLabel::Train;
    } else if (k < n_train + n_val) {
      out.split[i] = SplitLabel::Validation;
    }
  }
  return out;
}

Dataset split_by_time(const Dataset &ds, std::int64_t validation_start, std::int64_t test_start) {
  if (ds.timestamps.size() != static_cast<std::size_t>(ds.rows())) {
    throw InvalidArgument("split_by_time: dataset has no timestamps");
  }
  if (validation_start > test_start) {
    throw InvalidArgument("split_by_time: boundaries must be ordered");
  }
  Dataset out = ds;
  out.split.resize(ds.timestamps.size());
  for (std::size_t i = 0; i < ds.timestamps.size(); ++i) {
    const std::int64_t t = ds.timestamps[i];
    out.split[i] = t < validation_start ? SplitLabel::Train
                   : t < test_start     ? SplitLabel::Validation
                                        : SplitLabel::Test;
  }
  return out;
}

} // namespace cngp
