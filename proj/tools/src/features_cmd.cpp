#include <cmath>

#include "cngp/cli/commands.hpp"
#include "cngp/cli/table.hpp"
#include "cngp/data.hpp"
#include "common.hpp"

namespace cngp::cli {

std::vector<std::filesystem::path> cmd_features(const RunConfig &config) {
  const auto input = detail::existing_input(config, "input_path");
  const auto covariates = config.get_list("covariates");
  if (covariates.empty()) {
    throw ConfigError("key 'covariates' is required");
  }
  LagFeatureOptions options;
  options.pool_width = config.get_int("pool_minutes") * 60;
  options.lookback = config.get_int("lookback_minutes") * 60;
  options.target_window = config.get_int("window_minutes") * 60;
  options.seasonal = config.get_bool("seasonal");
  const auto validation_year = config.get_int("validation_year");
  const auto test_year = config.get_int("test_year");
  if ((validation_year == 0) != (test_year == 0) || validation_year > test_year) {
    throw ConfigError("validation_year and test_year must both be set and ordered, or both 0");
  }
  const auto dir = detail::prepare_output_dir(config);
  const auto out_path = detail::output_path(config, "dataset_path", "features.csv");

  const Table table = read_table(input);
  TimeSeries series;
  for (const auto &cell : table.text("timestamp")) {
    try {
      series.timestamps.push_back(parse_iso8601(cell));
    } catch (const InvalidArgument &e) {
      throw DataError(e.what());
    }
  }
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  series.covariate_names = covariates;
  series.covariates.resize(n, static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    const auto col = table.numeric(covariates[j]);
    series.covariates.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Eigen::VectorXd>(col.data(), n);
  }
  const std::string response = config.get_string("response");
  const auto y = table.numeric(response);
  series.response = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  series.response_name = response;
  for (const auto &flag : config.get_list("flags")) {
    if (table.find(flag)) {
      const auto v = table.numeric(flag);
      series.flags.emplace(flag, Eigen::Map<const Eigen::VectorXd>(v.data(), n));
    }
  }

  Dataset ds = build_lag_features(series, options);
  if (validation_year != 0) {
    ds = split_by_time(ds, year_start(static_cast<int>(validation_year)),
                       year_start(static_cast<int>(test_year)));
  }
  save_csv(out_path, ds);
  std::vector<std::pair<std::string, std::string>> entries{
      {"input_rows", std::to_string(n)},
      {"windows", std::to_string(ds.rows())},
      {"features", std::to_string(ds.cols())},
  };
  if (!ds.split.empty()) {
    for (const auto label : {SplitLabel::Train, SplitLabel::Validation, SplitLabel::Test}) {
      entries.emplace_back(std::string(to_string(label)) + ".rows",
                           std::to_string(ds.rows_with(label).size()));
    }
  }
  return {out_path, detail::write_manifest(config, entries)};
}

} // namespace cngp::cli
