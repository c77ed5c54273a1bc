#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "cngp/numerics.hpp"

namespace cngp {

// ---------------------------------------------------------------------------
// Noise models
// ---------------------------------------------------------------------------

struct GaussianNoise {
  double noise_var = 1.0;
};

/// Two-component scale mixture sharing the latent mean:
///   p(y | f) = pi N(y | f, tau sigma^2) + (1 - pi) N(y | f, sigma^2).
/// `outlier_prob` is pi, `inflation` is tau, `noise_var` is sigma^2.
struct ContaminatedNormal {
  double outlier_prob = 0.1;
  double inflation = 10.0;
  double noise_var = 1.0;
};

struct StudentTNoise {
  double dof = 5.0;
  double scale = 1.0;
};

struct LaplaceNoise {
  double scale = 1.0;
};

using NoiseModel = std::variant<GaussianNoise, ContaminatedNormal, StudentTNoise, LaplaceNoise>;

enum class NoiseFamily { Gaussian, ContaminatedNormal, StudentT, Laplace };

NoiseFamily family_of(const NoiseModel &noise);
std::string_view to_string(NoiseFamily family);
NoiseFamily parse_noise_family(std::string_view name);

/// Throws InvalidArgument when a parameter is out of range.
void validate(const NoiseModel &noise);

/// Unconstrained coordinates used by gradient-based updates:
///   Gaussian  [log sigma^2]
///   CN        [logit pi, log tau, log sigma^2]
///   Student-t [softplus^-1(nu - 2), log scale]
///   Laplace   [log b]
Eigen::VectorXd unconstrained_parameters(const NoiseModel &noise);
NoiseModel with_unconstrained_parameters(const NoiseModel &like,
                                         const Eigen::Ref<const Eigen::VectorXd> &params);
Eigen::Index unconstrained_parameter_count(NoiseFamily family);

double log_density(const NoiseModel &noise, double y, double f);
double log_density_df(const NoiseModel &noise, double y, double f);
/// Gradient of log_density with respect to the unconstrained coordinates.
Eigen::VectorXd log_density_param_gradient(const NoiseModel &noise, double y, double f);

/// Noise variance (finite for Student-t since dof > 2).
double noise_variance(const NoiseModel &noise);

// ---------------------------------------------------------------------------
// Expectations under a Gaussian latent marginal q(f) = N(mean, var)
// ---------------------------------------------------------------------------

struct LatentMarginal {
  double mean = 0.0;
  double var = 0.0;
};

/// Value of an expected per-point term together with its partial
/// derivatives with respect to the latent marginal and the unconstrained
/// noise parameters.
struct PointTerm {
  double value = 0.0;
  double d_mean = 0.0;
  double d_var = 0.0;
  Eigen::VectorXd d_noise;
};

/// E_q[log p(y | f)]. Closed form for Gaussian noise, Gauss-Hermite
/// otherwise. For the contaminated normal this is the quadrature value of
/// the exact mixture log density; training uses cn_augmented_term instead.
double expected_loglik(const NoiseModel &noise, double y, const LatentMarginal &q,
                       const GaussHermiteRule &rule);
double expected_loglik(const NoiseModel &noise, double y, const LatentMarginal &q,
                       int gh_nodes = 20);

PointTerm expected_loglik_term(const NoiseModel &noise, double y, const LatentMarginal &q,
                               const GaussHermiteRule &rule);

/// Posterior probability that y came from the inflated component after
/// integrating f out of each component:
///   pi Psi(tau s2) / (pi Psi(tau s2) + (1 - pi) Psi(s2)),
///   Psi(x) = N(y | q.mean, q.var + x).
double cn_responsibility(double y, const LatentMarginal &q, const ContaminatedNormal &theta);

/// Per-point contribution to the augmented bound with the assignment
/// probability held at `alpha`:
///   alpha [log pi - 0.5 log(2 pi tau s2) - D / (2 tau s2)]
///   + (1 - alpha) [log(1 - pi) - 0.5 log(2 pi s2) - D / (2 s2)] + H(alpha),
/// D = (y - q.mean)^2 + q.var. Derivatives treat alpha as constant.
PointTerm cn_augmented_term(double y, const LatentMarginal &q, const ContaminatedNormal &theta,
                            double alpha);

// ---------------------------------------------------------------------------
// Predictive distributions
// ---------------------------------------------------------------------------

struct GaussianPred {
  double mean = 0.0;
  double var = 1.0;
};

struct MixturePred {
  double weight = 0.1; ///< probability of the outlier component
  double mean = 0.0;
  double var_outlier = 1.0;
  double var_inlier = 1.0;
};

/// Latent draws f^(1..M) from q(f*) paired with the noise model; used for
/// Student-t and Laplace noise where the predictive has no closed form.
struct SampledPred {
  std::vector<double> latent_samples;
  NoiseModel noise;
};

using PredictiveDistribution = std::variant<GaussianPred, MixturePred, SampledPred>;

void validate(const PredictiveDistribution &pred);

double predictive_mean(const PredictiveDistribution &pred);
double predictive_variance(const PredictiveDistribution &pred);
double predictive_cdf(const PredictiveDistribution &pred, double y);
/// Log density for the closed-form laws. For SampledPred this is the
/// Monte-Carlo average (1/M) sum_m log p(y | f^(m)).
double predictive_log_density(const PredictiveDistribution &pred, double y);
double predictive_nlpd(const PredictiveDistribution &pred, double y);
double predictive_quantile(const PredictiveDistribution &pred, double p);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  bool contains(double y) const { return lo <= y && y <= hi; }
};

/// Central interval [q((1 - level) / 2), q((1 + level) / 2)].
Interval predictive_interval(const PredictiveDistribution &pred, double level);

} // namespace cngp
