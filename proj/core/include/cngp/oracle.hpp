#pragma once

#include <Eigen/Core>

#include "cngp/kernels.hpp"
#include "cngp/numerics.hpp"

namespace cngp {

inline constexpr Eigen::Index kExactGpMaxRows = 2000;

struct ExactPosterior {
  Eigen::VectorXd mean;
  Eigen::VectorXd latent_var;
  Eigen::VectorXd predictive_var;
};

/// Dense Gaussian-noise GP regression, used as a reference for the sparse
/// model on small problems.
class ExactGP {
public:
  ExactGP(Eigen::MatrixXd x, Eigen::VectorXd y, KernelSpec spec, double noise_var,
          Eigen::Index max_rows = kExactGpMaxRows);

  ExactPosterior posterior(const Eigen::MatrixXd &x_star) const;
  /// log N(y | 0, K + noise_var I)
  double log_marginal() const;

  const KernelSpec &spec() const { return spec_; }
  double noise_var() const { return noise_var_; }

private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  KernelSpec spec_;
  double noise_var_;
  Eigen::MatrixXd lower_;
  Eigen::VectorXd alpha_;
};

} // namespace cngp
