#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cngp/likelihoods.hpp"

namespace cngp {

enum class SplitLabel : std::uint8_t { Train, Validation, Test };

std::string_view to_string(SplitLabel label);
SplitLabel parse_split_label(std::string_view name);

/// Feature matrix plus target, with optional per-row split labels,
/// timestamps (seconds since the Unix epoch, UTC) and numeric side columns
/// that travel with the rows but are not model inputs (latent truth,
/// outlier mask, storm flags, ...).
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd target;
  std::vector<std::string> feature_names;
  std::string target_name = "y";
  std::vector<SplitLabel> split;
  std::vector<std::int64_t> timestamps;
  std::map<std::string, Eigen::VectorXd> extra;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index cols() const { return features.cols(); }

  /// Checks shapes, finiteness of features/target and unique names.
  void validate() const;

  Dataset subset(const std::vector<Eigen::Index> &rows) const;
  /// Rows carrying the label; all rows when the dataset is unlabeled and
  /// the label is Train.
  Dataset subset(SplitLabel label) const;
  std::vector<Eigen::Index> rows_with(SplitLabel label) const;
};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvLoadOptions {
  std::string target_column = "y";
  /// When false a missing target column is allowed: the target is then
  /// all zeros and Dataset::target_name is empty.
  bool require_target = true;
  /// Empty means every column that is not the target, timestamp, split or
  /// a carried column.
  std::vector<std::string> feature_columns;
  /// Numeric columns kept in Dataset::extra; empty cells become NaN.
  std::vector<std::string> carry_columns;
  /// Carried like carry_columns when present in the header, ignored otherwise.
  std::vector<std::string> optional_carry_columns;
  /// Parsed as ISO-8601 when present in the header.
  std::string timestamp_column = "timestamp";
  /// Values train / validation / test when present in the header.
  std::string split_column = "split";
};

struct CsvLoadResult {
  Dataset dataset;
  std::size_t dropped_rows = 0;
};

CsvLoadResult load_csv(const std::filesystem::path &path, const CsvLoadOptions &options = {});
CsvLoadResult parse_csv(std::string_view text, const CsvLoadOptions &options = {});

/// Header: [timestamp,] features..., target, extra columns..., [split].
void save_csv(const std::filesystem::path &path, const Dataset &dataset);
std::string format_csv(const Dataset &dataset);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// "YYYY-MM-DDTHH:MM:SS" with optional fractional seconds and trailing Z;
/// a space may replace the T. Throws InvalidArgument on malformed input.
std::int64_t parse_iso8601(std::string_view text);
std::string format_iso8601(std::int64_t seconds);
int year_of(std::int64_t seconds);
std::int64_t year_start(int year);

// ---------------------------------------------------------------------------
// Standardization and splitting
// ---------------------------------------------------------------------------

struct Standardizer {
  Eigen::VectorXd means;
  Eigen::VectorXd sds; ///< sample (n - 1) standard deviations

  Dataset apply(const Dataset &ds) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd &features) const;
};

/// Statistics of the training rows (all rows when unlabeled). Throws
/// ConstantColumn for a zero-variance column and DataTooSmall for fewer
/// than two training rows.
Standardizer fit_standardizer(const Dataset &ds);
Dataset apply_standardizer(const Standardizer &standardizer, const Dataset &ds);

struct SplitFractions {
  double train = 1.0;
  double validation = 0.0;
  double test = 0.0;
};

/// Random labeling: a seeded permutation, first round(n * train) rows
/// train, next round(n * validation) validation, remainder test.
Dataset split_dataset(const Dataset &ds, const SplitFractions &fractions, std::uint64_t seed);

/// Time labeling: timestamp < validation_start -> train,
/// < test_start -> validation, otherwise test.
Dataset split_by_time(const Dataset &ds, std::int64_t validation_start, std::int64_t test_start);

// ---------------------------------------------------------------------------
// Simulators
// ---------------------------------------------------------------------------

/// 0.3 + 0.4 x + 0.5 sin(2.7 x) + 1.1 / (1 + x^2)
double sim1_function(double x);
/// 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5; x has 10 entries.
double friedman_function(const Eigen::Ref<const Eigen::VectorXd> &x);

/// x ~ U(0, 5), y = f(x) + contaminated-normal noise. Side columns: "f"
/// (latent truth) and "outlier" (1 when the inflated component was drawn).
Dataset simulate_sim1(Eigen::Index n, const ContaminatedNormal &theta, std::uint64_t seed,
                      std::uint64_t stream_index = 0);

struct FriedmanScenario {
  double p_outlier = 0.0;
  double sigma_outlier = 1.0;
};

/// The four outlier scenarios, indexed 1..4.
FriedmanScenario friedman_scenario(int index);

/// x ~ U[0,1]^10, y = f(x) + N(0, 1), then floor(p_outlier n) uniformly
/// chosen targets are replaced by N(15, sigma_outlier^2) draws. With
/// noise_free the target equals f and no outliers are inserted. Side
/// columns "f" and "outlier".
Dataset simulate_friedman(Eigen::Index n, double p_outlier, double sigma_outlier,
                          std::uint64_t seed, bool noise_free = false,
                          std::uint64_t stream_index = 0);

// ---------------------------------------------------------------------------
// Lagged features from a timestamped series
// ---------------------------------------------------------------------------

struct TimeSeries {
  std::vector<std::int64_t> timestamps; ///< strictly increasing, seconds
  Eigen::MatrixXd covariates;           ///< NaN marks a missing value
  std::vector<std::string> covariate_names;
  Eigen::VectorXd response;
  std::string response_name = "y";
  /// Indicator columns aggregated by max over each target window.
  std::map<std::string, Eigen::VectorXd> flags;
};

/// Splits a loaded table into a series: the named covariates, response and
/// flags; timestamps taken from Dataset::timestamps.
TimeSeries time_series_from(const Dataset &table, const std::vector<std::string> &covariates,
                            const std::string &response, const std::vector<std::string> &flags);

struct LagFeatureOptions {
  std::int64_t pool_width = 300;    ///< seconds
  std::int64_t lookback = 3600;     ///< seconds; a multiple of pool_width
  std::int64_t target_window = 1200;
  /// Adds sin/cos of time-of-day and day-of-year (4 columns).
  bool seasonal = true;
};

/// One row per target window [t, t + target_window) aligned to multiples of
/// target_window since the epoch. Features are the medians of each
/// covariate over the lookback / pool_width consecutive pools preceding t
/// (named "<cov>_lag<k>", k = 1 nearest). The target is the window maximum
/// of the response; flags are window maxima. Windows with an empty pool or
/// no response value are dropped. Row timestamps are the window starts.
Dataset build_lag_features(const TimeSeries &series, const LagFeatureOptions &options = {});

} // namespace cngp
