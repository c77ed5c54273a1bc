#include "cngp/data.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "cngp/error.hpp"

namespace cngp {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) {
    --q;
  }
  return q;
}

// Median of the finite values of column `col` over rows [lo, hi); NaN when none.
double pooled_median(const Eigen::MatrixXd &cov, Eigen::Index col, std::size_t lo, std::size_t hi,
                     std::vector<double> &scratch) {
  scratch.clear();
  for (std::size_t r = lo; r < hi; ++r) {
    const double v = cov(static_cast<Eigen::Index>(r), col);
    if (std::isfinite(v)) {
      scratch.push_back(v);
    }
  }
  if (scratch.empty()) {
    return std::nan("");
  }
  const std::size_t mid = scratch.size() / 2;
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid), scratch.end());
  const double upper = scratch[mid];
  if (scratch.size() % 2 == 1) {
    return upper;
  }
  const double lower = *std::max_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

} // namespace

TimeSeries time_series_from(const Dataset &table, const std::vector<std::string> &covariates,
                            const std::string &response, const std::vector<std::string> &flags) {
  if (table.timestamps.size() != static_cast<std::size_t>(table.rows())) {
    throw MissingColumn("time series: table has no timestamp column");
  }
  auto column = [&](const std::string &name) -> Eigen::VectorXd {
    if (name == table.target_name) {
      return table.target;
    }
    const auto it = std::find(table.feature_names.begin(), table.feature_names.end(), name);
    if (it != table.feature_names.end()) {
      return table.features.col(it - table.feature_names.begin());
    }
    const auto ex = table.extra.find(name);
    if (ex != table.extra.end()) {
      return ex->second;
    }
    throw MissingColumn("time series: column '" + name + "' not found");
  };
  TimeSeries s;
  s.timestamps = table.timestamps;
  s.covariate_names = covariates;
  s.covariates.resize(table.rows(), static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    s.covariates.col(static_cast<Eigen::Index>(j)) = column(covariates[j]);
  }
  s.response = column(response);
  s.response_name = response;
  for (const auto &name : flags) {
    s.flags.emplace(name, column(name));
  }
  return s;
}

Dataset build_lag_features(const TimeSeries &series, const LagFeatureOptions &options) {
  const auto n = series.timestamps.size();
  const Eigen::Index c = series.covariates.cols();
  if (series.covariates.rows() != static_cast<Eigen::Index>(n) ||
      series.response.size() != static_cast<Eigen::Index>(n) ||
      series.covariate_names.size() != static_cast<std::size_t>(c)) {
    throw DimensionMismatch("build_lag_features: series columns disagree in length");
  }
  for (const auto &[name, flag] : series.flags) {
    if (flag.size() != static_cast<Eigen::Index>(n)) {
      throw DimensionMismatch("build_lag_features: flag '" + name + "' has the wrong length");
    }
  }
  if (options.pool_width <= 0 || options.target_window <= 0 || options.lookback <= 0 ||
      options.lookback % options.pool_width != 0) {
    throw InvalidArgument("build_lag_features: lookback must be a positive multiple of pool_width");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (series.timestamps[i] <= series.timestamps[i - 1]) {
      throw NonMonotonicTimestamps("build_lag_features: timestamps must be strictly increasing");
    }
  }
  if (n == 0) {
    throw EmptyAfterWindowing("build_lag_features: no complete windows");
  }

  const std::int64_t pools = options.lookback / options.pool_width;
  const std::int64_t w = options.target_window;
  const auto &ts = series.timestamps;
  auto first_at_or_after = [&](std::int64_t t) {
    return static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), t) - ts.begin());
  };

  Dataset out;
  out.target_name = series.response_name;
  for (Eigen::Index j = 0; j < c; ++j) {
    for (std::int64_t k = 1; k <= pools; ++k) {
      out.feature_names.push_back(series.covariate_names[static_cast<std::size_t>(j)] + "_lag" +
                                  std::to_string(k));
    }
  }
  if (options.seasonal) {
    out.feature_names.insert(out.feature_names.end(),
                             {"tod_sin", "tod_cos", "doy_sin", "doy_cos"});
  }
  const auto p = static_cast<Eigen::Index>(out.feature_names.size());

  std::vector<double> values;
  std::vector<double> targets;
  std::map<std::string, std::vector<double>> flag_values;
  std::vector<double> scratch;
  std::vector<double> row(static_cast<std::size_t>(p));

  const std::int64_t first_window = floor_div(ts.front(), w) * w;
  const std::int64_t last_window = floor_div(ts.back(), w) * w;
  for (std::int64_t start = first_window; start <= last_window; start += w) {
    const std::size_t lo = first_at_or_after(start);
    const std::size_t hi = first_at_or_after(start + w);
    if (lo == hi) {
      continue;
    }
    double target = -std::numeric_limits<double>::infinity();
    for (std::size_t r = lo; r < hi; ++r) {
      const double v = series.response(static_cast<Eigen::Index>(r));
      if (std::isfinite(v)) {
        target = std::max(target, v);
      }
    }
    if (!std::isfinite(target)) {
      continue;
    }
    bool complete = true;
    for (std::int64_t k = 1; k <= pools && complete; ++k) {
      const std::size_t plo = first_at_or_after(start - k * options.pool_width);
      const std::size_t phi = first_at_or_after(start - (k - 1) * options.pool_width);
      for (Eigen::Index j = 0; j < c; ++j) {
        const double med = pooled_median(series.covariates, j, plo, phi, scratch);
        if (!std::isfinite(med)) {
          complete = false;
          break;
        }
        row[static_cast<std::size_t>(j * pools + (k - 1))] = med;
      }
    }
    if (!complete) {
      continue;
    }
    if (options.seasonal) {
      using namespace std::chrono;
      const std::int64_t day = floor_div(start, 86400);
      const double tod = static_cast<double>(start - day * 86400) / 86400.0;
      const int y = year_of(start);
      const double year_len = static_cast<double>(year_start(y + 1) - year_start(y));
      const double doy = static_cast<double>(start - year_start(y)) / year_len;
      const double two_pi = 2.0 * std::numbers::pi;
      const auto base = static_cast<std::size_t>(c * pools);
      row[base] = std::sin(two_pi * tod);
      row[base + 1] = std::cos(two_pi * tod);
      row[base + 2] = std::sin(two_pi * doy);
      row[base + 3] = std::cos(two_pi * doy);
    }
    values.insert(values.end(), row.begin(), row.end());
    targets.push_back(target);
    out.timestamps.push_back(start);
    for (const auto &[name, flag] : series.flags) {
      double m = 0.0;
      bool any = false;
      for (std::size_t r = lo; r < hi; ++r) {
        const double v = flag(static_cast<Eigen::Index>(r));
        if (std::isfinite(v)) {
          m = any ? std::max(m, v) : v;
          any = true;
        }
      }
      flag_values[name].push_back(any ? m : std::nan(""));
    }
  }
  if (targets.empty()) {
    throw EmptyAfterWindowing("build_lag_features: no complete windows");
  }
  const auto rows = static_cast<Eigen::Index>(targets.size());
  out.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, p);
  out.target = Eigen::Map<const Eigen::VectorXd>(targets.data(), rows);
  for (auto &[name, v] : flag_values) {
    out.extra.emplace(name, Eigen::Map<const Eigen::VectorXd>(v.data(), rows));
  }
  return out;
}

} // namespace cngp
