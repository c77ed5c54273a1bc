#include "cngp/variational.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "cngp/error.hpp"

namespace cngp {

namespace {

constexpr Eigen::Index kMarginalChunk = 4096;

} // namespace

VariationalState VariationalState::prior(const Eigen::MatrixXd &inducing_inputs) {
  if (inducing_inputs.rows() < 1) {
    throw InvalidArgument("VariationalState: at least one inducing input required");
  }
  const Eigen::Index m = inducing_inputs.rows();
  return {inducing_inputs, Eigen::VectorXd::Zero(m), Eigen::MatrixXd::Identity(m, m)};
}

VariationalState VariationalState::from_unwhitened(const Eigen::MatrixXd &inducing_inputs,
                                                   const Eigen::VectorXd &m,
                                                   const Eigen::MatrixXd &s,
                                                   const KernelSpec &spec,
                                                   const JitterPolicy &policy) {
  const Eigen::Index size = inducing_inputs.rows();
  if (m.size() != size || s.rows() != size || s.cols() != size) {
    throw DimensionMismatch("from_unwhitened: m and S must match the inducing inputs");
  }
  const auto lk = factor_inducing(spec, inducing_inputs, policy).lower;
  const auto tri = lk.triangularView<Eigen::Lower>();
  VariationalState state;
  state.inducing_inputs = inducing_inputs;
  state.mean = tri.solve(m);
  // L_k^{-1} S L_k^{-T} = L L^T
  Eigen::MatrixXd white = tri.solve(tri.solve(s).transpose());
  white = 0.5 * (white + white.transpose());
  state.cov_factor = cholesky_psd(white, policy).lower;
  return state;
}

Eigen::VectorXd VariationalState::unwhitened_mean(const KernelSpec &spec,
                                                  const JitterPolicy &policy) const {
  const auto lk = factor_inducing(spec, inducing_inputs, policy).lower;
  return lk.triangularView<Eigen::Lower>() * mean;
}

Eigen::MatrixXd VariationalState::unwhitened_cov(const KernelSpec &spec,
                                                 const JitterPolicy &policy) const {
  const auto lk = factor_inducing(spec, inducing_inputs, policy).lower;
  const Eigen::MatrixXd a = lk.triangularView<Eigen::Lower>() *
                            cov_factor.triangularView<Eigen::Lower>().toDenseMatrix();
  return a * a.transpose();
}

void VariationalState::validate() const {
  const Eigen::Index m = size();
  if (m < 1) {
    throw InvalidArgument("VariationalState: at least one inducing input required");
  }
  if (mean.size() != m || cov_factor.rows() != m || cov_factor.cols() != m) {
    throw DimensionMismatch("VariationalState: mean/cov_factor do not match inducing inputs");
  }
  if ((cov_factor.diagonal().array() <= 0.0).any()) {
    throw InvalidArgument("VariationalState: cov_factor diagonal must be positive");
  }
  if (!cov_factor.isLowerTriangular(0.0)) {
    throw InvalidArgument("VariationalState: cov_factor must be lower-triangular");
  }
  if (!mean.allFinite() || !cov_factor.allFinite() || !inducing_inputs.allFinite()) {
    throw InvalidArgument("VariationalState: non-finite entries");
  }
}

CholeskyResult factor_inducing(const KernelSpec &spec, const Eigen::MatrixXd &inducing_inputs,
                               const JitterPolicy &policy) {
  return cholesky_psd(kernel_matrix(spec, inducing_inputs, inducing_inputs), policy);
}

std::vector<LatentMarginal> latent_marginals(const VariationalState &state, const KernelSpec &spec,
                                             const Eigen::MatrixXd &x,
                                             const JitterPolicy &policy) {
  state.validate();
  if (x.cols() != state.inducing_inputs.cols()) {
    throw DimensionMismatch("latent_marginals: input dimension mismatch");
  }
  const auto lk = factor_inducing(spec, state.inducing_inputs, policy).lower;
  const auto lk_tri = lk.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd l = state.cov_factor.triangularView<Eigen::Lower>();

  std::vector<LatentMarginal> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index start = 0; start < x.rows(); start += kMarginalChunk) {
    const Eigen::Index len = std::min(kMarginalChunk, x.rows() - start);
    const Eigen::MatrixXd xb = x.middleRows(start, len);
    const Eigen::MatrixXd w = lk_tri.solve(kernel_matrix(spec, state.inducing_inputs, xb));
    const Eigen::VectorXd mu = w.transpose() * state.mean;
    const Eigen::MatrixXd t = l.transpose() * w;
    const Eigen::VectorXd kdiag = kernel_diag(spec, xb);
    for (Eigen::Index i = 0; i < len; ++i) {
      const double var = kdiag(i) - w.col(i).squaredNorm() + t.col(i).squaredNorm();
      out[static_cast<std::size_t>(start + i)] = {mu(i), std::max(var, kMinLatentVariance)};
    }
  }
  return out;
}

double kl_to_prior(const VariationalState &state) {
  state.validate();
  const Eigen::MatrixXd l = state.cov_factor.triangularView<Eigen::Lower>();
  const double m = static_cast<double>(state.size());
  const double log_det = 2.0 * state.cov_factor.diagonal().array().log().sum();
  return 0.5 * (l.squaredNorm() + state.mean.squaredNorm() - m - log_det);
}

} // namespace cngp
