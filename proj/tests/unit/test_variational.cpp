#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <gtest/gtest.h>

#include "cngp/error.hpp"
#include "cngp/variational.hpp"
#include "instances.hpp"

namespace cngp {
namespace {

// Direct evaluation of the unwhitened formulas with a dense inverse.
struct Unwhitened {
  Eigen::VectorXd m;
  Eigen::MatrixXd s;
};

Unwhitened random_unwhitened(Rng &rng, const Eigen::MatrixXd &kmm) {
  const auto m = kmm.rows();
  const Eigen::MatrixXd b = testing::uniform_matrix(rng, m, m, -0.5, 0.5);
  Unwhitened u;
  u.m = testing::normal_vector(rng, m);
  u.s = 0.5 * kmm + b * b.transpose() + 0.05 * Eigen::MatrixXd::Identity(m, m);
  return u;
}

double kl_oracle(const Unwhitened &q, const Eigen::MatrixXd &kmm) {
  const Eigen::MatrixXd kinv = kmm.inverse();
  const double m = static_cast<double>(kmm.rows());
  return 0.5 * ((kinv * q.s).trace() + q.m.dot(kinv * q.m) - m - std::log(q.s.determinant()) +
                std::log(kmm.determinant()));
}

TEST(LatentMarginals, PriorStateReproducesPrior) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed, Stream::Dataset, 21);
    const auto spec = testing::random_kernel(rng, 2, KernelFamily::SquaredExponential);
    const Eigen::MatrixXd x = testing::uniform_matrix(rng, 8, 2, -2.0, 2.0);
    const auto state = VariationalState::prior(x);
    const auto q = latent_marginals(state, spec, x);
    for (const auto &qi : q) {
      EXPECT_EQ(qi.mean, 0.0);
      EXPECT_NEAR(qi.var, spec.output_scale, 1e-8);
    }
    EXPECT_NEAR(kl_to_prior(state), 0.0, 1e-14);
  }
}

TEST(LatentMarginals, SingleInducingPointAtTestPoint) {
  const auto spec = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1);
  const Eigen::MatrixXd z = Eigen::MatrixXd::Constant(1, 1, 0.3);
  const auto state = VariationalState::from_unwhitened(z, Eigen::VectorXd::Constant(1, 1.7),
                                                       Eigen::MatrixXd::Constant(1, 1, 0.4), spec);
  const auto q = latent_marginals(state, spec, z);
  EXPECT_NEAR(q[0].mean, 1.7, 1e-12);
  EXPECT_NEAR(q[0].var, 0.4, 1e-12);
}

TEST(LatentMarginals, MatchUnwhitenedFormula) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed, Stream::Dataset, 22);
    for (auto family : {KernelFamily::SquaredExponential, KernelFamily::Matern32}) {
      const auto spec = testing::random_kernel(rng, 2, family);
      const Eigen::MatrixXd z = testing::uniform_matrix(rng, 5, 2, -2.0, 2.0);
      const Eigen::MatrixXd x = testing::uniform_matrix(rng, 9, 2, -2.5, 2.5);
      const Eigen::MatrixXd kmm = kernel_matrix(spec, z, z);
      const Unwhitened u = random_unwhitened(rng, kmm);
      const auto state = VariationalState::from_unwhitened(z, u.m, u.s, spec);
      const Eigen::MatrixXd a = kernel_matrix(spec, x, z) * kmm.inverse();
      const Eigen::VectorXd mean = a * u.m;
      const Eigen::MatrixXd cov = kernel_matrix(spec, x, x) + a * (u.s - kmm) * a.transpose();
      const auto q = latent_marginals(state, spec, x);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        EXPECT_NEAR(q[static_cast<std::size_t>(i)].mean, mean(i), 1e-7);
        EXPECT_NEAR(q[static_cast<std::size_t>(i)].var, std::max(cov(i, i), kMinLatentVariance), 1e-7);
        EXPECT_GE(q[static_cast<std::size_t>(i)].var, kMinLatentVariance);
      }
    }
  }
}

TEST(LatentMarginals, VariancesNeverNegative) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed, Stream::Dataset, 23);
    const auto inst = testing::random_instance(seed, NoiseFamily::Gaussian, 30, 6, 3);
    const auto q = latent_marginals(inst.model.variational, inst.model.kernel, inst.x);
    for (const auto &qi : q) {
      EXPECT_GE(qi.var, kMinLatentVariance);
    }
  }
}

TEST(LatentMarginals, DimensionMismatch) {
  const auto spec = KernelSpec::isotropic(KernelFamily::SquaredExponential, 2);
  const auto state = VariationalState::prior(Eigen::MatrixXd::Zero(3, 2));
  EXPECT_THROW(latent_marginals(state, spec, Eigen::MatrixXd::Zero(4, 3)), DimensionMismatch);
}

TEST(KlToPrior, UnivariateExample) {
  const auto spec = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1);
  const auto state = VariationalState::from_unwhitened(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1),
                                                       Eigen::MatrixXd::Constant(1, 1, 2.0), spec);
  EXPECT_NEAR(kl_to_prior(state), 0.5 * (2.0 - 1.0 - std::log(2.0)), 1e-12);
  EXPECT_NEAR(kl_to_prior(state), 0.15343, 1e-5);
}

TEST(KlToPrior, MatchesUnwhitenedFormulaAndIsNonnegative) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed, Stream::Dataset, 24);
    const auto spec = testing::random_kernel(rng, 2, KernelFamily::Matern32);
    const Eigen::MatrixXd z = testing::uniform_matrix(rng, 4, 2, -2.0, 2.0);
    const Eigen::MatrixXd kmm = kernel_matrix(spec, z, z);
    const Unwhitened u = random_unwhitened(rng, kmm);
    const auto state = VariationalState::from_unwhitened(z, u.m, u.s, spec);
    const double kl = kl_to_prior(state);
    EXPECT_NEAR(kl, kl_oracle(u, kmm), 1e-6 * std::max(1.0, kl));
    EXPECT_GE(kl, -1e-10);
  }
}

TEST(VariationalState, UnwhitenedRoundTrip) {
  Rng rng(5, Stream::Dataset, 25);
  const auto spec = testing::random_kernel(rng, 3, KernelFamily::SquaredExponential);
  const Eigen::MatrixXd z = testing::uniform_matrix(rng, 6, 3, -1.0, 1.0);
  const Unwhitened u = random_unwhitened(rng, kernel_matrix(spec, z, z));
  const auto state = VariationalState::from_unwhitened(z, u.m, u.s, spec);
  EXPECT_NO_THROW(state.validate());
  EXPECT_TRUE(state.unwhitened_mean(spec).isApprox(u.m, 1e-8));
  EXPECT_TRUE(state.unwhitened_cov(spec).isApprox(u.s, 1e-8));
  EXPECT_TRUE(state.cov_factor.isLowerTriangular());
  EXPECT_GT(state.cov_factor.diagonal().minCoeff(), 0.0);
}

TEST(VariationalState, ValidationRejectsBadFactor) {
  auto state = VariationalState::prior(Eigen::MatrixXd::Zero(2, 1));
  state.cov_factor(0, 0) = 0.0;
  EXPECT_THROW(state.validate(), InvalidArgument);
  state = VariationalState::prior(Eigen::MatrixXd::Zero(2, 1));
  state.cov_factor(0, 1) = 0.5;
  EXPECT_THROW(state.validate(), InvalidArgument);
  state = VariationalState::prior(Eigen::MatrixXd::Zero(2, 1));
  state.mean = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(state.validate(), DimensionMismatch);
}

} // namespace
} // namespace cngp
