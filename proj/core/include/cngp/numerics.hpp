#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace cngp {

/// Escalation schedule used when a kernel matrix is numerically singular.
/// The first attempt uses no jitter; attempt k (k >= 1) adds
/// initial_jitter * growth_factor^(k-1) * mean(diag(A)) to the diagonal.
struct JitterPolicy {
  double initial_jitter = 1e-8;
  double growth_factor = 10.0;
  int max_attempts = 6;

  void validate() const;
};

struct CholeskyResult {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};

/// Lower Cholesky factor of A + jitter * I for the smallest jitter in the
/// policy schedule that succeeds. Throws NotPositiveDefinite otherwise.
CholeskyResult cholesky_psd(const Eigen::MatrixXd &a,
                            const JitterPolicy &policy = {});

/// Nodes and weights of the physicists' Gauss-Hermite rule
/// (weight function exp(-t^2)).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline constexpr int kMaxGaussHermiteNodes = 64;

/// Golub-Welsch construction; nodes sorted ascending. Valid for 1 <= K <= 64.
GaussHermiteRule gauss_hermite(int node_count);

/// E[g(f)] for f ~ N(mean, var) using the supplied rule. Throws
/// EvaluationError when g returns a non-finite value.
double gh_expect(double mean, double var, const std::function<double(double)> &g,
                 const GaussHermiteRule &rule);

double gh_expect(double mean, double var, const std::function<double(double)> &g,
                 int node_count);

// Small scalar helpers shared across modules.

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

inline double log_normal_pdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + r * r / var);
}

inline double log_sum_exp(double a, double b) {
  const double hi = std::max(a, b);
  if (!std::isfinite(hi)) {
    return hi;
  }
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

inline double inverse_softplus(double y) {
  return y > 30.0 ? y : std::log(std::expm1(y));
}

/// Entropy of a Bernoulli(p) variable in nats; 0 at the endpoints.
inline double bernoulli_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) {
    h -= p * std::log(p);
  }
  if (p < 1.0) {
    h -= (1.0 - p) * std::log1p(-p);
  }
  return h;
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// Standard normal quantile.
double normal_quantile(double p);

} // namespace cngp
