#include "cngp/oracle.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "cngp/error.hpp"

namespace cngp {

ExactGP::ExactGP(Eigen::MatrixXd x, Eigen::VectorXd y, KernelSpec spec, double noise_var,
                 Eigen::Index max_rows)
    : x_(std::move(x)), y_(std::move(y)), spec_(std::move(spec)), noise_var_(noise_var) {
  if (x_.rows() != y_.size()) {
    throw DimensionMismatch("ExactGP: X and y differ in rows");
  }
  if (x_.rows() < 1) {
    throw InvalidArgument("ExactGP: at least one training row required");
  }
  if (x_.rows() > max_rows) {
    throw InvalidArgument("ExactGP: too many rows for dense inference");
  }
  if (!(noise_var_ > 0.0)) {
    throw InvalidArgument("ExactGP: noise variance must be positive");
  }
  spec_.validate();
  Eigen::MatrixXd k = kernel_matrix(spec_, x_, x_);
  k.diagonal().array() += noise_var_;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("ExactGP: K + noise_var I is not positive definite");
  }
  lower_ = llt.matrixL();
  alpha_ = llt.solve(y_);
}

ExactPosterior ExactGP::posterior(const Eigen::MatrixXd &x_star) const {
  const Eigen::MatrixXd ks = kernel_matrix(spec_, x_, x_star);
  const Eigen::MatrixXd v = lower_.triangularView<Eigen::Lower>().solve(ks);
  ExactPosterior out;
  out.mean = ks.transpose() * alpha_;
  out.latent_var = kernel_diag(spec_, x_star) - v.colwise().squaredNorm().transpose();
  out.predictive_var = out.latent_var.array() + noise_var_;
  return out;
}

double ExactGP::log_marginal() const {
  const double n = static_cast<double>(y_.size());
  return -0.5 * y_.dot(alpha_) - lower_.diagonal().array().log().sum() - 0.5 * n * kLogTwoPi;
}

} // namespace cngp
