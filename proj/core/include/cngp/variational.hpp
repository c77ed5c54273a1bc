#pragma once

#include <vector>

#include <Eigen/Core>

#include "cngp/kernels.hpp"
#include "cngp/likelihoods.hpp"
#include "cngp/numerics.hpp"

namespace cngp {

/// Inducing-point variational state.
///
/// The inducing values are parameterized in whitened form: with
/// K_mm + jitter I = L_k L_k^T, u = L_k v and q(v) = N(mean, L L^T), so that
/// q(u) = N(L_k mean, L_k L L^T L_k^T). `cov_factor` is the lower-triangular
/// L with strictly positive diagonal. The state with mean = 0 and L = I is
/// q(u) = p(u). Use from_unwhitened / unwhitened_mean / unwhitened_cov to
/// move between (m, S) and the stored coordinates.
struct VariationalState {
  Eigen::MatrixXd inducing_inputs; ///< Z, m x p
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov_factor;

  Eigen::Index size() const { return inducing_inputs.rows(); }

  /// q(u) = p(u) at the given inducing inputs.
  static VariationalState prior(const Eigen::MatrixXd &inducing_inputs);

  /// Builds the state whose q(u) = N(m, S) under the kernel's prior on Z.
  static VariationalState from_unwhitened(const Eigen::MatrixXd &inducing_inputs,
                                          const Eigen::VectorXd &m, const Eigen::MatrixXd &s,
                                          const KernelSpec &spec,
                                          const JitterPolicy &policy = {});

  Eigen::VectorXd unwhitened_mean(const KernelSpec &spec, const JitterPolicy &policy = {}) const;
  Eigen::MatrixXd unwhitened_cov(const KernelSpec &spec, const JitterPolicy &policy = {}) const;

  void validate() const;
};

inline constexpr double kMinLatentVariance = 1e-12;

/// Factor of K(Z, Z) shared by all computations on one state.
CholeskyResult factor_inducing(const KernelSpec &spec, const Eigen::MatrixXd &inducing_inputs,
                               const JitterPolicy &policy = {});

/// Marginals of q(f) at the rows of x:
///   mean_i = k_i^T K_mm^{-1} m,  var_i = k(x_i, x_i) + k_i^T K_mm^{-1}(S - K_mm)K_mm^{-1} k_i,
/// variances clamped below at kMinLatentVariance.
std::vector<LatentMarginal> latent_marginals(const VariationalState &state, const KernelSpec &spec,
                                             const Eigen::MatrixXd &x,
                                             const JitterPolicy &policy = {});

/// KL[q(u) || p(u)]. In whitened coordinates this is
/// 0.5 [tr(L L^T) + mean^T mean - m - log det(L L^T)], equal to the
/// unwhitened expression for the same q(u).
double kl_to_prior(const VariationalState &state);

} // namespace cngp
