#include <cmath>

#include "cngp/cli/commands.hpp"
#include "cngp/cli/table.hpp"
#include "cngp/data.hpp"
#include "cngp/metrics.hpp"
#include "common.hpp"

namespace cngp::cli {

using detail::fmt;

namespace {

struct Columns {
  std::vector<double> y, mean, lo, hi, nlpd, skill;
};

Columns pick(const Columns &c, const std::vector<std::size_t> &rows) {
  Columns out;
  auto take = [&](const std::vector<double> &from, std::vector<double> &to) {
    if (from.empty()) {
      return;
    }
    for (const auto i : rows) {
      to.push_back(from[i]);
    }
  };
  take(c.y, out.y);
  take(c.mean, out.mean);
  take(c.lo, out.lo);
  take(c.hi, out.hi);
  take(c.nlpd, out.nlpd);
  take(c.skill, out.skill);
  return out;
}

std::vector<double> thresholds_from(const RunConfig &config) {
  std::vector<double> explicit_values = config.get_real_list("thresholds");
  if (!config.has("threshold_source")) {
    return explicit_values;
  }
  const auto source = detail::existing_input(config, "threshold_source");
  const Table t = read_table(source);
  const auto values = t.numeric(config.get_string("threshold_column"));
  std::vector<std::string> labels;
  if (t.find("split") && config.has("threshold_split")) {
    labels = t.text("split");
  }
  std::vector<double> pool;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isfinite(values[i]) &&
        (labels.empty() || labels[i] == config.get_string("threshold_split"))) {
      pool.push_back(values[i]);
    }
  }
  if (pool.empty()) {
    throw EmptyAfterFiltering("threshold_source: no usable values");
  }
  for (const double q : config.get_real_list("threshold_quantiles")) {
    if (!(q > 0.0 && q < 1.0)) {
      throw ConfigError("threshold_quantiles must lie in (0, 1)");
    }
    explicit_values.push_back(empirical_quantile(pool, q));
  }
  return explicit_values;
}

void add_metrics(CsvWriter &w, const std::string &subset, const Columns &c,
                 const std::vector<double> &thresholds) {
  auto row = [&](const std::string &metric, const std::string &threshold, const std::string &value) {
    w.add({subset, metric, threshold, value});
  };
  row("n", "", std::to_string(c.y.size()));
  if (c.y.empty()) {
    return;
  }
  row("rmse", "", fmt(rmse(c.y, c.mean)));
  row("mae", "", fmt(mae(c.y, c.mean)));
  if (!c.nlpd.empty()) {
    double sum = 0.0;
    for (const double v : c.nlpd) {
      sum += v;
    }
    row("nlpd", "", fmt(sum / static_cast<double>(c.nlpd.size())));
  }
  std::vector<Interval> intervals;
  for (std::size_t i = 0; i < c.y.size(); ++i) {
    intervals.push_back({c.lo[i], c.hi[i]});
  }
  const CoverageReport cov = coverage_and_length(intervals, c.y);
  row("coverage", "", fmt(cov.coverage));
  row("interval_length_median", "", fmt(cov.length.median));
  row("interval_length_iqr", "", fmt(cov.length.iqr));
  row("interval_length_max", "", fmt(cov.length.max));
  for (const double t : thresholds) {
    const SkillScores s = skill_scores(c.y, c.skill, t);
    const std::string ts = fmt(t);
    row("hss", ts, s.hss ? fmt(*s.hss) : "not_defined");
    row("tss", ts, s.tss ? fmt(*s.tss) : "not_defined");
    row("hits", ts, std::to_string(s.table.hits));
    row("misses", ts, std::to_string(s.table.misses));
    row("false_alarms", ts, std::to_string(s.table.false_alarms));
    row("correct_negatives", ts, std::to_string(s.table.correct_negatives));
  }
}

} // namespace

std::vector<std::filesystem::path> cmd_evaluate(const RunConfig &config) {
  const auto predictions = detail::existing_input(config, "predictions_path");
  const std::string skill_input = config.get_string("skill_input");
  if (skill_input != "mean" && skill_input != "lo" && skill_input != "hi") {
    throw ConfigError("skill_input must be mean, lo or hi");
  }
  const std::vector<double> thresholds = thresholds_from(config);
  detail::prepare_output_dir(config);
  const auto out_path = detail::output_path(config, "metrics_path", "metrics.csv");

  const Table t = read_table(predictions);
  Columns all;
  all.y = t.numeric(config.get_string("truth_column"));
  all.mean = t.numeric("mean");
  all.lo = t.numeric("lo");
  all.hi = t.numeric("hi");
  if (t.find("nlpd")) {
    all.nlpd = t.numeric("nlpd");
  }
  all.skill = t.numeric(skill_input);

  std::vector<std::size_t> rows;
  const std::string split = config.get_string("split");
  const std::vector<std::string> labels = split.empty() ? std::vector<std::string>{} : t.text("split");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (!split.empty() && labels[i] != split) {
      continue;
    }
    if (!std::isfinite(all.y[i]) || !std::isfinite(all.mean[i]) || !std::isfinite(all.lo[i]) ||
        !std::isfinite(all.hi[i])) {
      throw DataError("predictions: row " + std::to_string(i) + " lacks target or prediction values");
    }
    rows.push_back(i);
  }
  if (rows.empty()) {
    throw EmptyAfterFiltering("predictions: no rows to evaluate");
  }

  CsvWriter w({"subset", "metric", "threshold", "value"});
  add_metrics(w, "all", pick(all, rows), thresholds);
  const std::string flag = config.get_string("flag_column");
  if (!flag.empty() && t.find(flag)) {
    const auto f = t.numeric(flag);
    std::vector<std::size_t> on, off;
    for (const auto i : rows) {
      if (std::isfinite(f[i])) {
        (f[i] >= 0.5 ? on : off).push_back(i);
      }
    }
    add_metrics(w, flag + "=1", pick(all, on), thresholds);
    add_metrics(w, flag + "=0", pick(all, off), thresholds);
  }
  w.save(out_path);

  std::vector<std::pair<std::string, std::string>> entries{{"rows", std::to_string(rows.size())}};
  std::string ts;
  for (const double v : thresholds) {
    ts += (ts.empty() ? "" : ",") + fmt(v);
  }
  entries.emplace_back("thresholds", ts);
  return {out_path, detail::write_manifest(config, entries)};
}

} // namespace cngp::cli
