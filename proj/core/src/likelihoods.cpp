#include "cngp/likelihoods.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include "cngp/error.hpp"

namespace cngp {

namespace {

template <class... Ts> struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInvSqrtPi = 0.56418958354775628694807945156077;

double student_t_log_density(const StudentTNoise &t, double r) {
  const double nu = t.dof;
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * std::numbers::pi) - std::log(t.scale) -
         0.5 * (nu + 1.0) * std::log1p(r * r / (nu * t.scale * t.scale));
}

double laplace_cdf(double b, double r) {
  return r < 0.0 ? 0.5 * std::exp(r / b) : 1.0 - 0.5 * std::exp(-r / b);
}

// Posterior probability of the inflated component for a fixed latent value.
double cn_pointwise_weight(const ContaminatedNormal &cn, double r) {
  const double a = std::log(cn.outlier_prob) + log_normal_pdf(r, 0.0, cn.inflation * cn.noise_var);
  const double b = std::log1p(-cn.outlier_prob) + log_normal_pdf(r, 0.0, cn.noise_var);
  return sigmoid(a - b);
}

} // namespace

NoiseFamily family_of(const NoiseModel &noise) {
  return std::visit(overloaded{
                        [](const GaussianNoise &) { return NoiseFamily::Gaussian; },
                        [](const ContaminatedNormal &) { return NoiseFamily::ContaminatedNormal; },
                        [](const StudentTNoise &) { return NoiseFamily::StudentT; },
                        [](const LaplaceNoise &) { return NoiseFamily::Laplace; },
                    },
                    noise);
}

std::string_view to_string(NoiseFamily family) {
  switch (family) {
  case NoiseFamily::Gaussian:
    return "gaussian";
  case NoiseFamily::ContaminatedNormal:
    return "cn";
  case NoiseFamily::StudentT:
    return "student_t";
  case NoiseFamily::Laplace:
    return "laplace";
  }
  return "unknown";
}

NoiseFamily parse_noise_family(std::string_view name) {
  if (name == "gaussian" || name == "g") {
    return NoiseFamily::Gaussian;
  }
  if (name == "cn" || name == "contaminated_normal") {
    return NoiseFamily::ContaminatedNormal;
  }
  if (name == "student_t" || name == "t") {
    return NoiseFamily::StudentT;
  }
  if (name == "laplace" || name == "l") {
    return NoiseFamily::Laplace;
  }
  throw InvalidArgument("unknown noise family '" + std::string(name) + "'");
}

void validate(const NoiseModel &noise) {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  std::visit(overloaded{
                 [&](const GaussianNoise &g) {
                   if (!positive(g.noise_var)) {
                     throw InvalidArgument("Gaussian noise variance must be positive");
                   }
                 },
                 [&](const ContaminatedNormal &cn) {
                   if (!(cn.outlier_prob > 0.0 && cn.outlier_prob < 1.0)) {
                     throw InvalidArgument("CN outlier probability must lie in (0, 1)");
                   }
                   if (!positive(cn.inflation) || !positive(cn.noise_var)) {
                     throw InvalidArgument("CN inflation and noise variance must be positive");
                   }
                 },
                 [&](const StudentTNoise &t) {
                   if (!(t.dof > 2.0) || !std::isfinite(t.dof) || !positive(t.scale)) {
                     throw InvalidArgument("Student-t requires dof > 2 and positive scale");
                   }
                 },
                 [&](const LaplaceNoise &l) {
                   if (!positive(l.scale)) {
                     throw InvalidArgument("Laplace scale must be positive");
                   }
                 },
             },
             noise);
}

Eigen::Index unconstrained_parameter_count(NoiseFamily family) {
  switch (family) {
  case NoiseFamily::Gaussian:
  case NoiseFamily::Laplace:
    return 1;
  case NoiseFamily::StudentT:
    return 2;
  case NoiseFamily::ContaminatedNormal:
    return 3;
  }
  return 0;
}

Eigen::VectorXd unconstrained_parameters(const NoiseModel &noise) {
  return std::visit(overloaded{
                        [](const GaussianNoise &g) {
                          Eigen::VectorXd p(1);
                          p << std::log(g.noise_var);
                          return p;
                        },
                        [](const ContaminatedNormal &cn) {
                          Eigen::VectorXd p(3);
                          p << logit(cn.outlier_prob), std::log(cn.inflation),
                              std::log(cn.noise_var);
                          return p;
                        },
                        [](const StudentTNoise &t) {
                          Eigen::VectorXd p(2);
                          p << inverse_softplus(t.dof - 2.0), std::log(t.scale);
                          return p;
                        },
                        [](const LaplaceNoise &l) {
                          Eigen::VectorXd p(1);
                          p << std::log(l.scale);
                          return p;
                        },
                    },
                    noise);
}

NoiseModel with_unconstrained_parameters(const NoiseModel &like,
                                         const Eigen::Ref<const Eigen::VectorXd> &p) {
  if (p.size() != unconstrained_parameter_count(family_of(like))) {
    throw DimensionMismatch("noise model: wrong number of unconstrained parameters");
  }
  return std::visit(overloaded{
                        [&](const GaussianNoise &) -> NoiseModel {
                          return GaussianNoise{std::exp(p(0))};
                        },
                        [&](const ContaminatedNormal &) -> NoiseModel {
                          return ContaminatedNormal{sigmoid(p(0)), std::exp(p(1)),
                                                    std::exp(p(2))};
                        },
                        [&](const StudentTNoise &) -> NoiseModel {
                          return StudentTNoise{2.0 + softplus(p(0)), std::exp(p(1))};
                        },
                        [&](const LaplaceNoise &) -> NoiseModel {
                          return LaplaceNoise{std::exp(p(0))};
                        },
                    },
                    like);
}

double log_density(const NoiseModel &noise, double y, double f) {
  const double r = y - f;
  return std::visit(
      overloaded{
          [&](const GaussianNoise &g) { return log_normal_pdf(r, 0.0, g.noise_var); },
          [&](const ContaminatedNormal &cn) {
            return log_sum_exp(
                std::log(cn.outlier_prob) + log_normal_pdf(r, 0.0, cn.inflation * cn.noise_var),
                std::log1p(-cn.outlier_prob) + log_normal_pdf(r, 0.0, cn.noise_var));
          },
          [&](const StudentTNoise &t) { return student_t_log_density(t, r); },
          [&](const LaplaceNoise &l) { return -std::log(2.0 * l.scale) - std::abs(r) / l.scale; },
      },
      noise);
}

double log_density_df(const NoiseModel &noise, double y, double f) {
  const double r = y - f;
  return std::visit(overloaded{
                        [&](const GaussianNoise &g) { return r / g.noise_var; },
                        [&](const ContaminatedNormal &cn) {
                          const double w = cn_pointwise_weight(cn, r);
                          return w * r / (cn.inflation * cn.noise_var) +
                                 (1.0 - w) * r / cn.noise_var;
                        },
                        [&](const StudentTNoise &t) {
                          return (t.dof + 1.0) * r / (t.dof * t.scale * t.scale + r * r);
                        },
                        [&](const LaplaceNoise &l) {
                          return r > 0.0 ? 1.0 / l.scale : (r < 0.0 ? -1.0 / l.scale : 0.0);
                        },
                    },
                    noise);
}

Eigen::VectorXd log_density_param_gradient(const NoiseModel &noise, double y, double f) {
  const double r = y - f;
  const double r2 = r * r;
  return std::visit(
      overloaded{
          [&](const GaussianNoise &g) {
            Eigen::VectorXd d(1);
            d << -0.5 + 0.5 * r2 / g.noise_var;
            return d;
          },
          [&](const ContaminatedNormal &cn) {
            const double w = cn_pointwise_weight(cn, r);
            const double out = -0.5 + 0.5 * r2 / (cn.inflation * cn.noise_var);
            const double in = -0.5 + 0.5 * r2 / cn.noise_var;
            Eigen::VectorXd d(3);
            d << w - cn.outlier_prob, w * out, w * out + (1.0 - w) * in;
            return d;
          },
          [&](const StudentTNoise &t) {
            const double nu = t.dof;
            const double s2 = t.scale * t.scale;
            const double denom = nu * s2 + r2;
            const double d_nu = 0.5 * boost::math::digamma(0.5 * (nu + 1.0)) -
                                0.5 * boost::math::digamma(0.5 * nu) - 0.5 / nu -
                                0.5 * std::log1p(r2 / (nu * s2)) +
                                0.5 * (nu + 1.0) * r2 / (nu * denom);
            // nu = 2 + softplus(raw)  =>  dnu/draw = sigmoid(raw)
            const double raw = inverse_softplus(nu - 2.0);
            Eigen::VectorXd d(2);
            d << d_nu * sigmoid(raw), -1.0 + (nu + 1.0) * r2 / denom;
            return d;
          },
          [&](const LaplaceNoise &l) {
            Eigen::VectorXd d(1);
            d << -1.0 + std::abs(r) / l.scale;
            return d;
          },
      },
      noise);
}

double noise_variance(const NoiseModel &noise) {
  return std::visit(
      overloaded{
          [](const GaussianNoise &g) { return g.noise_var; },
          [](const ContaminatedNormal &cn) {
            return cn.outlier_prob * cn.inflation * cn.noise_var +
                   (1.0 - cn.outlier_prob) * cn.noise_var;
          },
          [](const StudentTNoise &t) { return t.scale * t.scale * t.dof / (t.dof - 2.0); },
          [](const LaplaceNoise &l) { return 2.0 * l.scale * l.scale; },
      },
      noise);
}

double expected_loglik(const NoiseModel &noise, double y, const LatentMarginal &q,
                       const GaussHermiteRule &rule) {
  if (!(q.var >= 0.0)) {
    throw InvalidArgument("expected_loglik: latent variance must be non-negative");
  }
  if (const auto *g = std::get_if<GaussianNoise>(&noise)) {
    const double d = (y - q.mean) * (y - q.mean) + q.var;
    return -0.5 * (kLogTwoPi + std::log(g->noise_var)) - 0.5 * d / g->noise_var;
  }
  if (q.var == 0.0) {
    return log_density(noise, y, q.mean);
  }
  return gh_expect(q.mean, q.var, [&](double f) { return log_density(noise, y, f); }, rule);
}

double expected_loglik(const NoiseModel &noise, double y, const LatentMarginal &q,
                       int gh_nodes) {
  return expected_loglik(noise, y, q, gauss_hermite(gh_nodes));
}

PointTerm expected_loglik_term(const NoiseModel &noise, double y, const LatentMarginal &q,
                               const GaussHermiteRule &rule) {
  PointTerm term;
  if (const auto *g = std::get_if<GaussianNoise>(&noise)) {
    const double r = y - q.mean;
    const double d = r * r + q.var;
    term.value = -0.5 * (kLogTwoPi + std::log(g->noise_var)) - 0.5 * d / g->noise_var;
    term.d_mean = r / g->noise_var;
    term.d_var = -0.5 / g->noise_var;
    term.d_noise.resize(1);
    term.d_noise << -0.5 + 0.5 * d / g->noise_var;
    return term;
  }

  const Eigen::Index np = unconstrained_parameter_count(family_of(noise));
  term.d_noise = Eigen::VectorXd::Zero(np);
  const double var = std::max(q.var, 1e-300);
  const double spread = std::sqrt(2.0 * var);
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double w = rule.weights[k] * kInvSqrtPi;
    const double f = q.mean + spread * rule.nodes[k];
    const double value = log_density(noise, y, f);
    if (!std::isfinite(value)) {
      throw EvaluationError("expected_loglik_term: non-finite log density");
    }
    const double slope = log_density_df(noise, y, f);
    term.value += w * value;
    term.d_mean += w * slope;
    term.d_var += w * slope * rule.nodes[k] / spread;
    term.d_noise += w * log_density_param_gradient(noise, y, f);
  }
  return term;
}

double cn_responsibility(double y, const LatentMarginal &q, const ContaminatedNormal &theta) {
  if (theta.inflation == 1.0) {
    return theta.outlier_prob;
  }
  const double a = std::log(theta.outlier_prob) +
                   log_normal_pdf(y, q.mean, q.var + theta.inflation * theta.noise_var);
  const double b = std::log1p(-theta.outlier_prob) + log_normal_pdf(y, q.mean, q.var + theta.noise_var);
  return sigmoid(a - b);
}

PointTerm cn_augmented_term(double y, const LatentMarginal &q, const ContaminatedNormal &theta,
                            double alpha) {
  const double pi = theta.outlier_prob;
  const double s2 = theta.noise_var;
  const double ts2 = theta.inflation * s2;
  const double r = y - q.mean;
  const double d = r * r + q.var;

  PointTerm term;
  term.value = alpha * (std::log(pi) - 0.5 * (kLogTwoPi + std::log(ts2)) - 0.5 * d / ts2) +
               (1.0 - alpha) * (std::log1p(-pi) - 0.5 * (kLogTwoPi + std::log(s2)) - 0.5 * d / s2) +
               bernoulli_entropy(alpha);
  const double precision = alpha / ts2 + (1.0 - alpha) / s2;
  term.d_mean = precision * r;
  term.d_var = -0.5 * precision;
  term.d_noise.resize(3);
  term.d_noise << alpha - pi, alpha * (-0.5 + 0.5 * d / ts2), -0.5 + 0.5 * d * precision;
  return term;
}

// ---------------------------------------------------------------------------

void validate(const PredictiveDistribution &pred) {
  std::visit(overloaded{
                 [](const GaussianPred &g) {
                   if (!(g.var > 0.0)) {
                     throw InvalidArgument("GaussianPred: variance must be positive");
                   }
                 },
                 [](const MixturePred &m) {
                   if (!(m.weight >= 0.0 && m.weight <= 1.0) || !(m.var_outlier > 0.0) ||
                       !(m.var_inlier > 0.0)) {
                     throw InvalidArgument("MixturePred: invalid weight or variances");
                   }
                 },
                 [](const SampledPred &s) {
                   if (s.latent_samples.empty()) {
                     throw InvalidArgument("SampledPred: at least one latent sample required");
                   }
                   validate(s.noise);
                 },
             },
             pred);
}

double predictive_mean(const PredictiveDistribution &pred) {
  return std::visit(overloaded{
                        [](const GaussianPred &g) { return g.mean; },
                        [](const MixturePred &m) { return m.mean; },
                        [](const SampledPred &s) {
                          double acc = 0.0;
                          for (double f : s.latent_samples) {
                            acc += f;
                          }
                          return acc / static_cast<double>(s.latent_samples.size());
                        },
                    },
                    pred);
}

double predictive_variance(const PredictiveDistribution &pred) {
  return std::visit(overloaded{
                        [](const GaussianPred &g) { return g.var; },
                        [](const MixturePred &m) {
                          return m.weight * m.var_outlier + (1.0 - m.weight) * m.var_inlier;
                        },
                        [](const SampledPred &s) {
                          const double mean = predictive_mean(PredictiveDistribution{s});
                          double acc = 0.0;
                          for (double f : s.latent_samples) {
                            acc += (f - mean) * (f - mean);
                          }
                          return acc / static_cast<double>(s.latent_samples.size()) +
                                 noise_variance(s.noise);
                        },
                    },
                    pred);
}

double predictive_cdf(const PredictiveDistribution &pred, double y) {
  return std::visit(
      overloaded{
          [&](const GaussianPred &g) { return normal_cdf((y - g.mean) / std::sqrt(g.var)); },
          [&](const MixturePred &m) {
            return m.weight * normal_cdf((y - m.mean) / std::sqrt(m.var_outlier)) +
                   (1.0 - m.weight) * normal_cdf((y - m.mean) / std::sqrt(m.var_inlier));
          },
          [&](const SampledPred &s) {
            double acc = 0.0;
            if (const auto *t = std::get_if<StudentTNoise>(&s.noise)) {
              const boost::math::students_t_distribution<double> dist(t->dof);
              for (double f : s.latent_samples) {
                acc += boost::math::cdf(dist, (y - f) / t->scale);
              }
            } else if (const auto *l = std::get_if<LaplaceNoise>(&s.noise)) {
              for (double f : s.latent_samples) {
                acc += laplace_cdf(l->scale, y - f);
              }
            } else {
              const double sd = std::sqrt(noise_variance(s.noise));
              const auto *cn = std::get_if<ContaminatedNormal>(&s.noise);
              for (double f : s.latent_samples) {
                if (cn != nullptr) {
                  acc += cn->outlier_prob *
                             normal_cdf((y - f) / std::sqrt(cn->inflation * cn->noise_var)) +
                         (1.0 - cn->outlier_prob) * normal_cdf((y - f) / std::sqrt(cn->noise_var));
                } else {
                  acc += normal_cdf((y - f) / sd);
                }
              }
            }
            return acc / static_cast<double>(s.latent_samples.size());
          },
      },
      pred);
}

double predictive_log_density(const PredictiveDistribution &pred, double y) {
  return std::visit(overloaded{
                        [&](const GaussianPred &g) { return log_normal_pdf(y, g.mean, g.var); },
                        [&](const MixturePred &m) {
                          if (m.weight <= 0.0) {
                            return log_normal_pdf(y, m.mean, m.var_inlier);
                          }
                          if (m.weight >= 1.0) {
                            return log_normal_pdf(y, m.mean, m.var_outlier);
                          }
                          return log_sum_exp(
                              std::log(m.weight) + log_normal_pdf(y, m.mean, m.var_outlier),
                              std::log1p(-m.weight) + log_normal_pdf(y, m.mean, m.var_inlier));
                        },
                        [&](const SampledPred &s) {
                          double acc = 0.0;
                          for (double f : s.latent_samples) {
                            acc += log_density(s.noise, y, f);
                          }
                          return acc / static_cast<double>(s.latent_samples.size());
                        },
                    },
                    pred);
}

double predictive_nlpd(const PredictiveDistribution &pred, double y) {
  return -predictive_log_density(pred, y);
}

double predictive_quantile(const PredictiveDistribution &pred, double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidArgument("predictive_quantile: probability must be in (0, 1)");
  }
  if (const auto *g = std::get_if<GaussianPred>(&pred)) {
    return g->mean + std::sqrt(g->var) * normal_quantile(p);
  }

  double lo = 0.0;
  double hi = 0.0;
  if (const auto *m = std::get_if<MixturePred>(&pred)) {
    const double sd = std::sqrt(std::max(m->var_outlier, m->var_inlier));
    lo = m->mean - 15.0 * sd;
    hi = m->mean + 15.0 * sd;
  } else {
    const auto &s = std::get<SampledPred>(pred);
    const auto [mn, mx] = std::minmax_element(s.latent_samples.begin(), s.latent_samples.end());
    const double sd = std::sqrt(noise_variance(s.noise));
    lo = *mn - 15.0 * sd;
    hi = *mx + 15.0 * sd;
  }
  // Widen until the bracket straddles p (heavy-tailed noise may need it).
  for (int i = 0; i < 60 && predictive_cdf(pred, lo) > p; ++i) {
    lo -= (hi - lo);
  }
  for (int i = 0; i < 60 && predictive_cdf(pred, hi) < p; ++i) {
    hi += (hi - lo);
  }
  for (int iter = 0; iter < 200 && hi - lo > 1e-10; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) {
      break;
    }
    if (predictive_cdf(pred, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Interval predictive_interval(const PredictiveDistribution &pred, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw InvalidArgument("predictive_interval: level must be in (0, 1)");
  }
  return {predictive_quantile(pred, 0.5 * (1.0 - level)),
          predictive_quantile(pred, 0.5 * (1.0 + level))};
}

} // namespace cngp
