#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <gtest/gtest.h>

#include "cngp/error.hpp"
#include "cngp/inference.hpp"
#include "cngp/oracle.hpp"
#include "gradient_check.hpp"
#include "instances.hpp"

namespace cngp {
namespace {

using testing::check_elbo_gradient;
using testing::random_instance;

std::vector<Eigen::Index> iota_rows(Eigen::Index n) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  return idx;
}

PredictOptions draws(int mc_samples, std::uint64_t seed) {
  PredictOptions o;
  o.mc_samples = mc_samples;
  o.seed = seed;
  return o;
}

void expect_gradients_match(NoiseFamily family, KernelFamily kernel) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto inst = random_instance(seed, family, 12, 5, 2, kernel);
    const std::vector<Eigen::Index> batch{1, 3, 4, 7, 10};
    const auto report = check_elbo_gradient(inst, batch, 12, 1e-4);
    EXPECT_GT(report.checked, 0);
    for (const auto &f : report.failures) {
      ADD_FAILURE() << "seed " << seed << " " << f.block << "[" << f.index << "] analytic "
                    << f.analytic << " numeric " << f.numeric;
    }
  }
}

TEST(ElboGradient, GaussianSe) { expect_gradients_match(NoiseFamily::Gaussian, KernelFamily::SquaredExponential); }
TEST(ElboGradient, ContaminatedNormalSe) {
  expect_gradients_match(NoiseFamily::ContaminatedNormal, KernelFamily::SquaredExponential);
}
TEST(ElboGradient, StudentTMatern) { expect_gradients_match(NoiseFamily::StudentT, KernelFamily::Matern32); }
TEST(ElboGradient, LaplaceSe) { expect_gradients_match(NoiseFamily::Laplace, KernelFamily::SquaredExponential); }
TEST(ElboGradient, ContaminatedNormalMatern) {
  expect_gradients_match(NoiseFamily::ContaminatedNormal, KernelFamily::Matern32);
}

TEST(ElboGradient, FullBatchGaussianNoiseVariance) {
  const auto inst = random_instance(9, NoiseFamily::Gaussian, 10, 4, 1);
  const auto rows = iota_rows(10);
  const auto g = elbo_with_gradient(inst.model, inst.x, inst.y, rows, 10).gradient.noise;
  const double s2 = std::get<GaussianNoise>(inst.model.noise).noise_var;
  const double numeric = testing::central_difference(
      [&](double t) {
        ModelState m = inst.model;
        m.noise = GaussianNoise{std::exp(t)};
        return elbo(m, inst.x, inst.y, rows, 10);
      },
      std::log(s2));
  EXPECT_TRUE(testing::close_relative(g(0), numeric, 1e-4));
}

TEST(CholeskyBackward, MatchesFiniteDifferences) {
  Rng rng(3, Stream::Dataset, 31);
  const Eigen::Index n = 5;
  const Eigen::MatrixXd b = testing::uniform_matrix(rng, n, n, -1.0, 1.0);
  const Eigen::MatrixXd a = b * b.transpose() + Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd w = testing::uniform_matrix(rng, n, n, -1.0, 1.0).triangularView<Eigen::Lower>();
  auto objective = [&](const Eigen::MatrixXd &m) {
    const Eigen::MatrixXd l = m.llt().matrixL();
    return (w.array() * l.array()).sum();
  };
  const Eigen::MatrixXd l = a.llt().matrixL();
  const Eigen::MatrixXd g = cholesky_backward(l, w);
  EXPECT_TRUE(g.isApprox(g.transpose(), 1e-12));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double numeric = testing::central_difference(
          [&](double t) {
            Eigen::MatrixXd m = a;
            m(i, j) += t;
            if (i != j) {
              m(j, i) += t;
            }
            return objective(m);
          },
          0.0);
      const double analytic = i == j ? g(i, i) : g(i, j) + g(j, i);
      EXPECT_NEAR(analytic, numeric, 1e-6);
    }
  }
}

TEST(Elbo, PriorStateEqualsSumOfExpectedLoglik) {
  auto inst = random_instance(1, NoiseFamily::Gaussian, 15, 4, 2);
  inst.model.variational = VariationalState::prior(inst.model.variational.inducing_inputs);
  const auto q = latent_marginals(inst.model.variational, inst.model.kernel, inst.x);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < inst.x.rows(); ++i) {
    EXPECT_NEAR(q[static_cast<std::size_t>(i)].var, inst.model.kernel.output_scale, 1e-12);
    sum += expected_loglik(inst.model.noise, inst.y(i), q[static_cast<std::size_t>(i)]);
  }
  EXPECT_NEAR(elbo(inst.model, inst.x, inst.y), sum, 1e-10);
}

TEST(Elbo, MinibatchScalesDataTerm) {
  const auto inst = random_instance(2, NoiseFamily::StudentT, 12, 4, 2);
  const std::vector<Eigen::Index> batch{0, 5, 6};
  const auto q = latent_marginals(inst.model.variational, inst.model.kernel, inst.x);
  double sum = 0.0;
  for (auto i : batch) {
    sum += expected_loglik(inst.model.noise, inst.y(i), q[static_cast<std::size_t>(i)]);
  }
  const double want = 12.0 / 3.0 * sum - kl_to_prior(inst.model.variational);
  EXPECT_NEAR(elbo(inst.model, inst.x, inst.y, batch, 12), want, 1e-10);
  const std::vector<Eigen::Index> bad{0, 12};
  EXPECT_THROW(elbo(inst.model, inst.x, inst.y, bad, 12), InvalidArgument);
  EXPECT_THROW(elbo(inst.model, inst.x, inst.y, std::span<const Eigen::Index>{}, 12), InvalidArgument);
}

TEST(Elbo, ContaminatedNormalWithUnitInflationEqualsGaussian) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = random_instance(seed, NoiseFamily::Gaussian, 14, 5, 2);
    const double s2 = std::get<GaussianNoise>(inst.model.noise).noise_var;
    const double gauss = elbo(inst.model, inst.x, inst.y);
    Rng rng(seed, Stream::Dataset, 32);
    inst.model.noise = ContaminatedNormal{rng.uniform(0.01, 0.99), 1.0, s2};
    EXPECT_NEAR(elbo(inst.model, inst.x, inst.y), gauss, 1e-10);
  }
}

TEST(Elbo, BelowExactLogMarginal) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = random_instance(seed, NoiseFamily::Gaussian, 40, 6, 2);
    const double s2 = std::get<GaussianNoise>(inst.model.noise).noise_var;
    const ExactGP exact(inst.x, inst.y, inst.model.kernel, s2);
    EXPECT_LE(elbo(inst.model, inst.x, inst.y), exact.log_marginal() + 1e-8);
  }
}

TEST(TauSwap, Examples) {
  const auto s = tau_swap({0.7, 0.25, 4.0});
  EXPECT_NEAR(s.outlier_prob, 0.3, 1e-15);
  EXPECT_NEAR(s.inflation, 4.0, 1e-15);
  EXPECT_NEAR(s.noise_var, 1.0, 1e-15);
  const auto u = tau_swap({0.2, 2.0, 1.5});
  EXPECT_EQ(u.outlier_prob, 0.2);
  EXPECT_EQ(u.inflation, 2.0);
  EXPECT_EQ(u.noise_var, 1.5);
}

TEST(TauSwap, LeavesDensityElboAndNlpdInvariant) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = random_instance(seed, NoiseFamily::ContaminatedNormal, 12, 4, 2);
    Rng rng(seed, Stream::Dataset, 33);
    const ContaminatedNormal theta{rng.uniform(0.5, 0.95), rng.uniform(0.05, 0.9), rng.uniform(1.0, 5.0)};
    const ContaminatedNormal swapped = tau_swap(theta);
    EXPECT_GE(swapped.inflation, 1.0);
    for (double r : {0.0, 1.0, 5.0}) {
      EXPECT_NEAR(log_density(theta, r, 0.0), log_density(swapped, r, 0.0), 1e-12);
    }
    inst.model.noise = theta;
    const double before = elbo(inst.model, inst.x, inst.y);
    const auto pb = predict(inst.model, inst.x);
    inst.model.noise = swapped;
    EXPECT_NEAR(elbo(inst.model, inst.x, inst.y), before, 1e-12 * std::max(1.0, std::abs(before)));
    const auto pa = predict(inst.model, inst.x);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      EXPECT_NEAR(predictive_nlpd(pa[i], inst.y(static_cast<Eigen::Index>(i))),
                  predictive_nlpd(pb[i], inst.y(static_cast<Eigen::Index>(i))), 1e-12);
    }
  }
}

TEST(ClosedFormNoiseUpdate, Examples) {
  const std::vector<double> alpha{0.5, 0.5, 1.0, 0.0};
  const std::vector<double> d{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(closed_form_noise_update({0.2, 5.0, 1.0}, alpha, d).outlier_prob, 0.5);

  const std::vector<double> ones(4, 1.0);
  const auto all = closed_form_noise_update({0.2, 1.0, 1.0}, ones, d);
  EXPECT_NEAR(all.noise_var, 2.5, 1e-15);
  EXPECT_NEAR(all.inflation, 1.0, 1e-15);
}

TEST(ClosedFormNoiseUpdate, KeepsInflationWithoutOutliers) {
  const std::vector<double> zeros(3, 0.0);
  const std::vector<double> d{1.0, 2.0, 3.0};
  const auto next = closed_form_noise_update({0.2, 7.0, 1.0}, zeros, d);
  EXPECT_EQ(next.inflation, 7.0);
  EXPECT_NEAR(next.noise_var, 2.0, 1e-15);
  EXPECT_GT(next.outlier_prob, 0.0);
}

// Assignment-weighted objective at fixed responsibilities (the quantity the
// closed-form updates maximize), written out directly.
double weighted_objective(const ContaminatedNormal &t, std::span<const double> alpha, std::span<const double> d) {
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double a = alpha[i];
    const double ts2 = t.inflation * t.noise_var;
    total += a * (std::log(t.outlier_prob) - 0.5 * (log2pi + std::log(ts2)) - d[i] / (2 * ts2));
    total += (1 - a) * (std::log1p(-t.outlier_prob) - 0.5 * (log2pi + std::log(t.noise_var)) -
                        d[i] / (2 * t.noise_var));
  }
  return total;
}

TEST(ClosedFormNoiseUpdate, NeverWorseThanCurrentAndBeatsNeighbours) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed, Stream::Dataset, 34);
    const std::size_t n = 5 + rng.below(45);
    std::vector<double> alpha(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
      alpha[i] = rng.uniform();
      d[i] = std::pow(rng.normal(), 2) * rng.uniform(0.2, 20.0) + 1e-3;
    }
    const ContaminatedNormal cur{rng.uniform(0.05, 0.5), rng.uniform(1.0, 20.0), rng.uniform(0.2, 3.0)};
    const ContaminatedNormal next = closed_form_noise_update(cur, alpha, d);
    const double f_next = weighted_objective(next, alpha, d);
    EXPECT_GE(f_next, weighted_objective(cur, alpha, d) - 1e-10);
    // Each coordinate is at its conditional maximum: no multiplicative
    // perturbation of a single coordinate improves the objective.
    for (double f : {0.9, 0.99, 1.01, 1.1}) {
      ContaminatedNormal p = next;
      p.outlier_prob = std::min(next.outlier_prob * f, 1.0 - 1e-12);
      EXPECT_LE(weighted_objective(p, alpha, d), f_next + 1e-10);
      p = next;
      p.inflation *= f;
      EXPECT_LE(weighted_objective(p, alpha, d), f_next + 1e-10);
    }
  }
}

// Expected squared residuals and responsibilities at the current state.
void assignment_statistics(const ModelState &model, const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                           std::vector<double> &alpha, std::vector<double> &d) {
  const auto q = latent_marginals(model.variational, model.kernel, x);
  const auto &theta = std::get<ContaminatedNormal>(model.noise);
  alpha.resize(q.size());
  d.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double r = y(static_cast<Eigen::Index>(i)) - q[i].mean;
    d[i] = r * r + q[i].var;
    alpha[i] = cn_responsibility(y(static_cast<Eigen::Index>(i)), q[i], theta);
  }
}

TEST(SgamBackwardClosedForm, AscendsAtFixedResponsibilities) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = random_instance(seed, NoiseFamily::ContaminatedNormal, 40, 5, 2);
    std::vector<double> alpha, d;
    assignment_statistics(inst.model, inst.x, inst.y, alpha, d);
    const auto before = std::get<ContaminatedNormal>(inst.model.noise);
    const auto after = sgam_backward_step_closed_form(inst.model, inst.x, inst.y);
    const auto stored = std::get<ContaminatedNormal>(inst.model.noise);
    EXPECT_EQ(stored.outlier_prob, after.outlier_prob);
    EXPECT_EQ(stored.inflation, after.inflation);
    EXPECT_EQ(stored.noise_var, after.noise_var);
    const auto want = closed_form_noise_update(before, alpha, d);
    EXPECT_NEAR(after.outlier_prob, want.outlier_prob, 1e-12);
    EXPECT_NEAR(after.inflation, want.inflation, 1e-10 * want.inflation);
    EXPECT_NEAR(after.noise_var, want.noise_var, 1e-12 * want.noise_var);
    EXPECT_GE(weighted_objective(after, alpha, d), weighted_objective(before, alpha, d) - 1e-8);
  }
}

TEST(SgamForwardStep, ZeroStepRefreshesResponsibilitiesOnly) {
  auto inst = random_instance(4, NoiseFamily::ContaminatedNormal, 10, 3, 2);
  const ModelState before = inst.model;
  auto opt = SgamOptimizer::for_model(inst.model, true);
  const auto rows = iota_rows(10);
  const auto res = sgam_forward_step(inst.model, opt, inst.x, inst.y, rows, 0.0);
  EXPECT_TRUE(res.applied);
  EXPECT_EQ(inst.model.variational.mean, before.variational.mean);
  EXPECT_EQ(inst.model.variational.cov_factor, before.variational.cov_factor);
  EXPECT_EQ(inst.model.variational.inducing_inputs, before.variational.inducing_inputs);
  ASSERT_EQ(res.responsibilities.size(), 10u);
  const auto q = latent_marginals(before.variational, before.kernel, inst.x);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_GE(res.responsibilities[i], 0.0);
    EXPECT_LE(res.responsibilities[i], 1.0);
    EXPECT_DOUBLE_EQ(res.responsibilities[i],
                     cn_responsibility(inst.y(static_cast<Eigen::Index>(i)), q[i],
                                       std::get<ContaminatedNormal>(before.noise)));
  }
}

TEST(SgamForwardStep, SmallStepIncreasesSinglePointElbo) {
  int increased = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto inst = random_instance(seed, NoiseFamily::ContaminatedNormal, 1, 1, 1);
    auto opt = SgamOptimizer::for_model(inst.model, true);
    const std::vector<Eigen::Index> one{0};
    const double before = elbo(inst.model, inst.x, inst.y);
    const auto res = sgam_forward_step(inst.model, opt, inst.x, inst.y, one, 1e-3);
    ASSERT_TRUE(res.applied);
    increased += elbo(inst.model, inst.x, inst.y) > before ? 1 : 0;
  }
  EXPECT_EQ(increased, 10);
}

TEST(SgamBackwardSgd, ZeroStepLeavesHyperparameters) {
  auto inst = random_instance(5, NoiseFamily::ContaminatedNormal, 10, 3, 2);
  const ModelState before = inst.model;
  auto opt = SgamOptimizer::for_model(inst.model, true);
  const auto rows = iota_rows(10);
  EXPECT_TRUE(sgam_backward_step_sgd(inst.model, opt, inst.x, inst.y, rows, 0.0).applied);
  EXPECT_EQ(inst.model.kernel.log_parameters(), before.kernel.log_parameters());
  EXPECT_TRUE(unconstrained_parameters(inst.model.noise).isApprox(unconstrained_parameters(before.noise), 1e-12));
}

TEST(SgamBackwardSgd, GaussianModelMovesOnlyKernelAndNoise) {
  auto inst = random_instance(6, NoiseFamily::Gaussian, 10, 3, 2);
  const ModelState before = inst.model;
  auto opt = SgamOptimizer::for_model(inst.model, true);
  const auto rows = iota_rows(10);
  EXPECT_TRUE(sgam_backward_step_sgd(inst.model, opt, inst.x, inst.y, rows, 0.01).applied);
  EXPECT_EQ(inst.model.variational.mean, before.variational.mean);
  EXPECT_NE(inst.model.kernel.log_parameters(), before.kernel.log_parameters());
  EXPECT_NE(std::get<GaussianNoise>(inst.model.noise).noise_var,
            std::get<GaussianNoise>(before.noise).noise_var);
}

// Optimal Gaussian-likelihood q(u) in closed form.
VariationalState optimal_gaussian_state(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                                        const Eigen::MatrixXd &z, const KernelSpec &spec, double s2) {
  const Eigen::MatrixXd kmm = kernel_matrix(spec, z, z);
  const Eigen::MatrixXd kmn = kernel_matrix(spec, z, x);
  const Eigen::MatrixXd sigma = (kmm + kmn * kmn.transpose() / s2).inverse();
  const Eigen::VectorXd m = kmm * sigma * kmn * y / s2;
  const Eigen::MatrixXd s = kmm * sigma * kmm;
  return VariationalState::from_unwhitened(z, m, 0.5 * (s + s.transpose()), spec);
}

TEST(CollapsedBound, EqualsExactLogMarginalWhenInducingAtData) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(seed, NoiseFamily::Gaussian, 25, 3, 2);
    const double s2 = std::get<GaussianNoise>(inst.model.noise).noise_var;
    const ExactGP exact(inst.x, inst.y, inst.model.kernel, s2);
    JitterPolicy exact_policy;
    exact_policy.initial_jitter = 0.0;
    exact_policy.max_attempts = 1;
    EXPECT_NEAR(collapsed_bound_gaussian(inst.x, inst.y, inst.x, inst.model.kernel, s2, exact_policy),
                exact.log_marginal(), 1e-8);
  }
}

TEST(CollapsedBound, BoundsExactLogMarginal) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = random_instance(seed, NoiseFamily::Gaussian, 60, 6, 2);
    const double s2 = std::get<GaussianNoise>(inst.model.noise).noise_var;
    const ExactGP exact(inst.x, inst.y, inst.model.kernel, s2);
    EXPECT_LE(collapsed_bound_gaussian(inst.x, inst.y, inst.model.variational.inducing_inputs,
                                       inst.model.kernel, s2),
              exact.log_marginal() + 1e-8);
  }
}

TEST(CollapsedBound, MatchesExplicitElboAtOptimalVariationalState) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto inst = random_instance(seed, NoiseFamily::Gaussian, 80, 12, 2);
    const double s2 = std::get<GaussianNoise>(inst.model.noise).noise_var;
    const Eigen::MatrixXd z = inst.model.variational.inducing_inputs;
    inst.model.variational = optimal_gaussian_state(inst.x, inst.y, z, inst.model.kernel, s2);
    const double bound = collapsed_bound_gaussian(inst.x, inst.y, z, inst.model.kernel, s2);
    EXPECT_NEAR(elbo(inst.model, inst.x, inst.y), bound, 1e-4);
    const auto rows = iota_rows(80);
    const auto g = elbo_with_gradient(inst.model, inst.x, inst.y, rows, 80).gradient;
    EXPECT_LT(g.mean.cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_LT(g.cov_factor.cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(Predict, ContaminatedNormalWithoutOutliersIsGaussian) {
  auto inst = random_instance(7, NoiseFamily::Gaussian, 10, 4, 2);
  const double s2 = std::get<GaussianNoise>(inst.model.noise).noise_var;
  const auto g = predict(inst.model, inst.x);
  inst.model.noise = ContaminatedNormal{1e-15, 10.0, s2};
  const auto c = predict(inst.model, inst.x);
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_TRUE(std::holds_alternative<GaussianPred>(g[i]));
    ASSERT_TRUE(std::holds_alternative<MixturePred>(c[i]));
    for (double y : {-2.0, 0.0, 1.5}) {
      EXPECT_NEAR(predictive_nlpd(c[i], y), predictive_nlpd(g[i], y), 1e-10);
    }
  }
}

TEST(Predict, MixtureMomentIdentities) {
  const auto inst = random_instance(8, NoiseFamily::ContaminatedNormal, 10, 4, 2);
  const auto theta = std::get<ContaminatedNormal>(inst.model.noise);
  const auto q = latent_marginals(inst.model.variational, inst.model.kernel, inst.x);
  const auto preds = predict(inst.model, inst.x);
  for (std::size_t i = 0; i < q.size(); ++i) {
    EXPECT_NEAR(predictive_mean(preds[i]), q[i].mean, 1e-12);
    const double want = q[i].var + theta.outlier_prob * theta.inflation * theta.noise_var +
                        (1 - theta.outlier_prob) * theta.noise_var;
    EXPECT_NEAR(predictive_variance(preds[i]), want, 1e-12);
  }
}

TEST(Predict, SampledStudentTConvergesToPlainDensity) {
  const StudentTNoise noise{4.0, 0.7};
  ModelState model;
  model.kernel = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1);
  model.noise = noise;
  model.variational = VariationalState::prior(Eigen::MatrixXd::Constant(1, 1, 0.5));
  model.variational.mean(0) = 1.3;
  model.variational.cov_factor(0, 0) = 1e-6;
  const auto preds = predict(model, Eigen::MatrixXd::Constant(1, 1, 0.5), draws(1000, 0));
  ASSERT_TRUE(std::holds_alternative<SampledPred>(preds[0]));
  EXPECT_EQ(std::get<SampledPred>(preds[0]).latent_samples.size(), 1000u);
  for (double y : {0.0, 1.3, 4.0}) {
    EXPECT_NEAR(predictive_nlpd(preds[0], y), -log_density(noise, y, 1.3), 0.05);
  }
}

TEST(Predict, SampledDrawsAreSeeded) {
  const auto inst = random_instance(9, NoiseFamily::Laplace, 10, 4, 2);
  const auto a = predict(inst.model, inst.x, draws(200, 3));
  const auto b = predict(inst.model, inst.x, draws(200, 3));
  const auto c = predict(inst.model, inst.x, draws(200, 4));
  EXPECT_EQ(std::get<SampledPred>(a[2]).latent_samples, std::get<SampledPred>(b[2]).latent_samples);
  EXPECT_NE(std::get<SampledPred>(a[2]).latent_samples, std::get<SampledPred>(c[2]).latent_samples);
}

// Small GP draw with Gaussian noise for training tests.
struct SmallProblem {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

SmallProblem smooth_problem(std::uint64_t seed, Eigen::Index n, double noise_sd) {
  Rng rng(seed, Stream::Dataset, 35);
  SmallProblem p;
  p.x = testing::uniform_matrix(rng, n, 1, -2.0, 2.0);
  p.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.y(i) = std::sin(2.0 * p.x(i, 0)) + noise_sd * rng.normal();
  }
  return p;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 4;
  c.batch_size = 50;
  c.inducing_count = 10;
  c.restarts = 2;
  c.seed = 11;
  c.mc_samples = 50;
  return c;
}

TEST(Fit, DeterministicTrace) {
  const auto p = smooth_problem(1, 150, 0.3);
  for (auto family : {NoiseFamily::ContaminatedNormal, NoiseFamily::StudentT}) {
    const auto a = fit(p.x, p.y, family, small_config());
    const auto b = fit(p.x, p.y, family, small_config());
    ASSERT_EQ(a.trace.rows.size(), b.trace.rows.size());
    for (std::size_t i = 0; i < a.trace.rows.size(); ++i) {
      EXPECT_EQ(a.trace.rows[i].elbo, b.trace.rows[i].elbo);
      EXPECT_EQ(unconstrained_parameters(a.trace.rows[i].noise), unconstrained_parameters(b.trace.rows[i].noise));
    }
    EXPECT_EQ(a.model.variational.mean, b.model.variational.mean);
    EXPECT_EQ(a.trace.selected_restart, b.trace.selected_restart);
  }
}

TEST(Fit, KeepsBestRestartAndImprovesOnInitialElbo) {
  const auto p = smooth_problem(2, 200, 0.3);
  for (auto family : {NoiseFamily::Gaussian, NoiseFamily::ContaminatedNormal, NoiseFamily::Laplace}) {
    auto config = small_config();
    config.epochs = 8;
    config.restarts = 3;
    const auto r = fit(p.x, p.y, family, config);
    ASSERT_EQ(r.trace.final_elbos.size(), 3u);
    const int sel = r.trace.selected_restart;
    for (double e : r.trace.final_elbos) {
      EXPECT_LE(e, r.trace.final_elbos[static_cast<std::size_t>(sel)]);
    }
    double initial = 0.0;
    for (const auto &row : r.trace.rows) {
      if (row.restart == sel && row.epoch == 0) {
        initial = row.elbo;
      }
    }
    EXPECT_GE(r.trace.final_elbos[static_cast<std::size_t>(sel)], initial);
    EXPECT_NEAR(elbo(r.model, p.x, p.y), r.trace.final_elbos[static_cast<std::size_t>(sel)],
                1e-9 * std::abs(initial));
    if (family == NoiseFamily::ContaminatedNormal) {
      EXPECT_GE(std::get<ContaminatedNormal>(r.model.noise).inflation, 1.0);
    }
  }
}

TEST(Fit, GaussianDataGivesDensityEquivalentContaminatedFit) {
  const auto train = smooth_problem(3, 200, 0.3);
  auto config = small_config();
  config.epochs = 30;
  const auto cn = fit(train.x, train.y, NoiseFamily::ContaminatedNormal, config);
  const auto theta = std::get<ContaminatedNormal>(cn.model.noise);
  RecordProperty("pi", std::to_string(theta.outlier_prob));
  RecordProperty("tau", std::to_string(theta.inflation));
  // theta is not identifiable here; the fitted mixture must act like a
  // single Gaussian of the same variance over the bulk of the residuals.
  const GaussianNoise g{noise_variance(theta)};
  const double sd = std::sqrt(g.noise_var);
  for (double r = -3.0 * sd; r <= 3.0 * sd; r += 0.25 * sd) {
    EXPECT_NEAR(log_density(theta, r, 0.0), log_density(g, r, 0.0), 0.1)
        << "pi " << theta.outlier_prob << " tau " << theta.inflation;
  }
}

TEST(Fit, EarlyStoppingRecordsValidationNlpd) {
  const auto train = smooth_problem(5, 150, 0.3);
  const auto val = smooth_problem(6, 60, 0.3);
  auto config = small_config();
  config.epochs = 6;
  config.restarts = 1;
  config.early_stop_patience = 1;
  const auto r = fit(train.x, train.y, NoiseFamily::Gaussian, config, ValidationSet{val.x, val.y});
  for (const auto &row : r.trace.rows) {
    EXPECT_TRUE(std::isfinite(row.validation_nlpd));
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto &row : r.trace.rows) {
    best = std::min(best, row.validation_nlpd);
  }
  EXPECT_NEAR(mean_validation_nlpd(r.model, {val.x, val.y}, draws(config.mc_samples, config.seed)), best, 1e-12);
}

TEST(Fit, RejectsBadInputs) {
  const auto p = smooth_problem(7, 30, 0.3);
  auto config = small_config();
  config.inducing_count = 31;
  EXPECT_THROW(fit(p.x, p.y, NoiseFamily::Gaussian, config), DataTooSmall);
  config = small_config();
  config.batch_size = 31;
  config.inducing_count = 5;
  EXPECT_THROW(fit(p.x, p.y, NoiseFamily::Gaussian, config), InvalidArgument);
  config = small_config();
  config.inducing_count = 5;
  EXPECT_THROW(fit(p.x, p.y.head(29), NoiseFamily::Gaussian, config), DimensionMismatch);
  config.restarts = 0;
  EXPECT_THROW(fit(p.x, p.y, NoiseFamily::Gaussian, config), InvalidArgument);
}

TEST(InitialModel, SamplesInducingRowsAndNoiseRanges) {
  const auto p = smooth_problem(8, 100, 0.3);
  const auto config = small_config();
  const auto m = initial_model(p.x, p.y, NoiseFamily::ContaminatedNormal, config, 0);
  const auto &z = m.variational.inducing_inputs;
  ASSERT_EQ(z.rows(), 10);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    bool found = false;
    for (Eigen::Index j = 0; j < p.x.rows() && !found; ++j) {
      found = z(i, 0) == p.x(j, 0);
    }
    EXPECT_TRUE(found);
  }
  EXPECT_NEAR(kl_to_prior(m.variational), 0.0, 1e-14);
  const auto theta = std::get<ContaminatedNormal>(m.noise);
  EXPECT_GE(theta.outlier_prob, 0.05);
  EXPECT_LE(theta.outlier_prob, 0.3);
  EXPECT_GE(theta.inflation, 2.0);
  EXPECT_LE(theta.inflation, 20.0);
  const auto other = initial_model(p.x, p.y, NoiseFamily::ContaminatedNormal, config, 1);
  EXPECT_NE(std::get<ContaminatedNormal>(other.noise).inflation, theta.inflation);
}

} // namespace
} // namespace cngp
