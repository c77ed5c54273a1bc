#include "cngp/data.hpp"

#include <cmath>
#include <numbers>

#include "cngp/error.hpp"
#include "cngp/rng.hpp"

namespace cngp {

double sim1_function(double x) {
  return 0.3 + 0.4 * x + 0.5 * std::sin(2.7 * x) + 1.1 / (1.0 + x * x);
}

double friedman_function(const Eigen::Ref<const Eigen::VectorXd> &x) {
  if (x.size() < 5) {
    throw DimensionMismatch("friedman_function: at least five inputs required");
  }
  const double a = x(2) - 0.5;
  return 10.0 * std::sin(std::numbers::pi * x(0) * x(1)) + 20.0 * a * a + 10.0 * x(3) +
         5.0 * x(4);
}

Dataset simulate_sim1(Eigen::Index n, const ContaminatedNormal &theta, std::uint64_t seed,
                      std::uint64_t stream_index) {
  if (n < 1) {
    throw InvalidArgument("simulate_sim1: n must be positive");
  }
  if (!(theta.outlier_prob >= 0.0 && theta.outlier_prob <= 1.0) || !(theta.inflation > 0.0) ||
      !(theta.noise_var >= 0.0)) {
    throw InvalidArgument("simulate_sim1: invalid noise parameters");
  }
  Rng rng(seed, Stream::Dataset, stream_index);
  Dataset ds;
  ds.features.resize(n, 1);
  ds.target.resize(n);
  ds.feature_names = {"x"};
  Eigen::VectorXd f(n);
  Eigen::VectorXd outlier(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = rng.uniform(0.0, 5.0);
    const bool is_outlier = rng.uniform() < theta.outlier_prob;
    const double var = is_outlier ? theta.inflation * theta.noise_var : theta.noise_var;
    const double eps = rng.normal();
    ds.features(i, 0) = x;
    f(i) = sim1_function(x);
    ds.target(i) = f(i) + std::sqrt(var) * eps;
    outlier(i) = is_outlier ? 1.0 : 0.0;
  }
  ds.extra.emplace("f", std::move(f));
  ds.extra.emplace("outlier", std::move(outlier));
  return ds;
}

FriedmanScenario friedman_scenario(int index) {
  switch (index) {
  case 1:
    return {0.1, 3.0};
  case 2:
    return {0.1, 10.0};
  case 3:
    return {0.2, 10.0};
  case 4:
    return {0.3, 10.0};
  default:
    throw InvalidArgument("friedman_scenario: index must be 1..4");
  }
}

Dataset simulate_friedman(Eigen::Index n, double p_outlier, double sigma_outlier,
                          std::uint64_t seed, bool noise_free, std::uint64_t stream_index) {
  if (n < 1) {
    throw InvalidArgument("simulate_friedman: n must be positive");
  }
  if (!(p_outlier >= 0.0 && p_outlier < 1.0) || !(sigma_outlier > 0.0)) {
    throw InvalidArgument("simulate_friedman: p_outlier must lie in [0, 1) and sigma_outlier > 0");
  }
  constexpr Eigen::Index kDim = 10;
  Rng rng(seed, Stream::Dataset, stream_index);
  Dataset ds;
  ds.features.resize(n, kDim);
  ds.target.resize(n);
  for (Eigen::Index j = 0; j < kDim; ++j) {
    ds.feature_names.push_back("x" + std::to_string(j + 1));
  }
  Eigen::VectorXd f(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < kDim; ++j) {
      ds.features(i, j) = rng.uniform();
    }
    f(i) = friedman_function(ds.features.row(i).transpose());
    ds.target(i) = noise_free ? f(i) : f(i) + rng.normal();
  }
  Eigen::VectorXd outlier = Eigen::VectorXd::Zero(n);
  if (!noise_free) {
    const auto count = static_cast<std::int64_t>(std::floor(p_outlier * static_cast<double>(n)));
    for (const std::int64_t i : rng.sample_without_replacement(n, count)) {
      ds.target(i) = rng.normal(15.0, sigma_outlier);
      outlier(i) = 1.0;
    }
  }
  ds.extra.emplace("f", std::move(f));
  ds.extra.emplace("outlier", std::move(outlier));
  return ds;
}

} // namespace cngp
