#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cngp/likelihoods.hpp"

namespace cngp {

double rmse(std::span<const double> y, std::span<const double> y_hat);
double mae(std::span<const double> y, std::span<const double> y_hat);
/// Mean of predictive_nlpd over the points.
double nlpd(std::span<const PredictiveDistribution> preds, std::span<const double> y);

struct LengthSummary {
  double median = 0.0;
  double iqr = 0.0; ///< Q75 - Q25, linear interpolation between order statistics
  double max = 0.0;
};

struct CoverageReport {
  double coverage = 0.0;
  LengthSummary length;
};

CoverageReport coverage_and_length(std::span<const PredictiveDistribution> preds,
                                   std::span<const double> y, double level);
/// Same summary for precomputed intervals.
CoverageReport coverage_and_length(std::span<const Interval> intervals, std::span<const double> y);

/// Empirical quantile with linear interpolation (type 7).
double empirical_quantile(std::vector<double> values, double p);

struct ContingencyTable {
  std::int64_t hits = 0;
  std::int64_t misses = 0;
  std::int64_t false_alarms = 0;
  std::int64_t correct_negatives = 0;

  std::int64_t total() const { return hits + misses + false_alarms + correct_negatives; }
};

/// An empty optional marks a score whose denominator is zero.
struct SkillScores {
  std::optional<double> hss;
  std::optional<double> tss;
  ContingencyTable table;
};

/// Events are value >= threshold, applied to both observations and predictions.
ContingencyTable contingency_table(std::span<const double> y, std::span<const double> y_hat,
                                   double threshold);
SkillScores skill_scores(const ContingencyTable &table);
SkillScores skill_scores(std::span<const double> y, std::span<const double> y_hat,
                         double threshold);

} // namespace cngp
