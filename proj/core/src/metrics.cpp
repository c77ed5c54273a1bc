#include "cngp/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cngp/error.hpp"

namespace cngp {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char *what) {
  if (a != b) {
    throw DimensionMismatch(std::string(what) + ": length mismatch");
  }
  if (a == 0) {
    throw InvalidArgument(std::string(what) + ": no points");
  }
}

} // namespace

double rmse(std::span<const double> y, std::span<const double> y_hat) {
  check_lengths(y.size(), y_hat.size(), "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - y_hat[i];
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> y_hat) {
  check_lengths(y.size(), y_hat.size(), "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum += std::abs(y[i] - y_hat[i]);
  }
  return sum / static_cast<double>(y.size());
}

double nlpd(std::span<const PredictiveDistribution> preds, std::span<const double> y) {
  check_lengths(preds.size(), y.size(), "nlpd");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum += predictive_nlpd(preds[i], y[i]);
  }
  return sum / static_cast<double>(y.size());
}

double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) {
    throw InvalidArgument("empirical_quantile: no values");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument("empirical_quantile: p must lie in [0, 1]");
  }
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

CoverageReport coverage_and_length(std::span<const Interval> intervals, std::span<const double> y) {
  check_lengths(intervals.size(), y.size(), "coverage_and_length");
  std::size_t inside = 0;
  std::vector<double> lengths(intervals.size());
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    inside += intervals[i].contains(y[i]) ? 1 : 0;
    lengths[i] = intervals[i].length();
  }
  CoverageReport out;
  out.coverage = static_cast<double>(inside) / static_cast<double>(y.size());
  out.length.median = empirical_quantile(lengths, 0.5);
  out.length.iqr = empirical_quantile(lengths, 0.75) - empirical_quantile(lengths, 0.25);
  out.length.max = *std::max_element(lengths.begin(), lengths.end());
  return out;
}

CoverageReport coverage_and_length(std::span<const PredictiveDistribution> preds,
                                   std::span<const double> y, double level) {
  check_lengths(preds.size(), y.size(), "coverage_and_length");
  std::vector<Interval> intervals;
  intervals.reserve(preds.size());
  for (const auto &p : preds) {
    intervals.push_back(predictive_interval(p, level));
  }
  return coverage_and_length(intervals, y);
}

ContingencyTable contingency_table(std::span<const double> y, std::span<const double> y_hat,
                                   double threshold) {
  check_lengths(y.size(), y_hat.size(), "skill_scores");
  ContingencyTable t;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool observed = y[i] >= threshold;
    const bool forecast = y_hat[i] >= threshold;
    if (observed && forecast) {
      ++t.hits;
    } else if (observed) {
      ++t.misses;
    } else if (forecast) {
      ++t.false_alarms;
    } else {
      ++t.correct_negatives;
    }
  }
  return t;
}

SkillScores skill_scores(const ContingencyTable &table) {
  const auto a = static_cast<double>(table.hits);
  const auto b = static_cast<double>(table.false_alarms);
  const auto c = static_cast<double>(table.misses);
  const auto d = static_cast<double>(table.correct_negatives);
  SkillScores out;
  out.table = table;
  const double hss_den = (a + c) * (c + d) + (a + b) * (b + d);
  if (hss_den != 0.0) {
    out.hss = 2.0 * (a * d - b * c) / hss_den;
  }
  if (a + c > 0.0 && b + d > 0.0) {
    out.tss = a / (a + c) - b / (b + d);
  }
  return out;
}

SkillScores skill_scores(std::span<const double> y, std::span<const double> y_hat,
                         double threshold) {
  return skill_scores(contingency_table(y, y_hat, threshold));
}

} // namespace cngp
