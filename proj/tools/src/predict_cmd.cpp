#include <cmath>
#include <fstream>
#include <sstream>

#include "cngp/cli/artifact.hpp"
#include "cngp/cli/commands.hpp"
#include "cngp/cli/table.hpp"
#include "cngp/data.hpp"
#include "common.hpp"

namespace cngp::cli {

using detail::fmt;

namespace {

std::vector<std::string> header_of(const std::filesystem::path &path) {
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line)) {
    throw MalformedCsv("missing header row in '" + path.string() + "'", 1);
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  std::vector<std::string> names;
  std::istringstream cells(line);
  std::string cell;
  while (std::getline(cells, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    names.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return names;
}

} // namespace

std::vector<std::filesystem::path> cmd_predict(const RunConfig &config) {
  const auto model_path = detail::existing_input(config, "model_path");
  const auto data_path = detail::existing_input(config, "data_path");
  const double level = config.get_real("level");
  if (!(level > 0.0 && level < 1.0)) {
    throw ConfigError("level must lie in (0, 1)");
  }
  const auto mc = config.get_int("mc_samples");
  if (mc < 1) {
    throw ConfigError("mc_samples must be positive");
  }
  detail::prepare_output_dir(config);
  const auto out_path = detail::output_path(config, "predictions_path", "predictions.csv");

  const ModelArtifact artifact = load_artifact(model_path);
  const auto header = header_of(data_path);
  std::string missing;
  for (const auto &name : artifact.feature_names) {
    if (std::find(header.begin(), header.end(), name) == header.end()) {
      missing += (missing.empty() ? "" : ", ") + name;
    }
  }
  if (!missing.empty()) {
    throw FeatureMismatch("missing feature columns: " + missing);
  }

  CsvLoadOptions options;
  options.target_column = artifact.target_name;
  options.require_target = false;
  options.feature_columns = artifact.feature_names;
  options.optional_carry_columns = config.get_list("side_columns");
  const CsvLoadResult loaded = load_csv(data_path, options);
  const Dataset &ds = loaded.dataset;
  const bool has_target = !ds.target_name.empty();

  PredictOptions predict_options;
  predict_options.mc_samples = static_cast<int>(mc);
  predict_options.seed = static_cast<std::uint64_t>(config.get_int("seed"));
  const auto preds = predict_raw(artifact, select_features(artifact, ds), predict_options);

  std::vector<std::string> columns{"row"};
  if (!ds.timestamps.empty()) {
    columns.emplace_back("timestamp");
  }
  if (!ds.split.empty()) {
    columns.emplace_back("split");
  }
  columns.insert(columns.end(), {"mean", "sd", "lo", "hi", "level"});
  if (has_target) {
    columns.insert(columns.end(), {"target", "nlpd"});
  }
  for (const auto &[name, col] : ds.extra) {
    columns.push_back(name);
  }
  CsvWriter w(columns);
  double nlpd_sum = 0.0;
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    const auto &p = preds[static_cast<std::size_t>(i)];
    const Interval iv = predictive_interval(p, level);
    std::vector<std::string> cells{std::to_string(i)};
    if (!ds.timestamps.empty()) {
      cells.push_back(format_iso8601(ds.timestamps[static_cast<std::size_t>(i)]));
    }
    if (!ds.split.empty()) {
      cells.emplace_back(to_string(ds.split[static_cast<std::size_t>(i)]));
    }
    cells.insert(cells.end(), {fmt(predictive_mean(p)), fmt(std::sqrt(predictive_variance(p))),
                               fmt(iv.lo), fmt(iv.hi), fmt(level)});
    if (has_target) {
      const double nl = predictive_nlpd(p, ds.target(i));
      nlpd_sum += nl;
      cells.insert(cells.end(), {fmt(ds.target(i)), fmt(nl)});
    }
    for (const auto &[name, col] : ds.extra) {
      cells.push_back(fmt(col(i)));
    }
    w.add(std::move(cells));
  }
  w.save(out_path);

  std::vector<std::pair<std::string, std::string>> entries{
      {"rows", std::to_string(ds.rows())},
      {"dropped_rows", std::to_string(loaded.dropped_rows)},
      {"noise_family", std::string(to_string(family_of(artifact.model.noise)))},
  };
  if (has_target) {
    entries.emplace_back("mean_nlpd", fmt(nlpd_sum / static_cast<double>(ds.rows())));
  }
  return {out_path, detail::write_manifest(config, entries)};
}

} // namespace cngp::cli
