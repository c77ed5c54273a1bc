#pragma once

#include <string>
#include <string_view>

#include <Eigen/Core>

namespace cngp {

enum class KernelFamily { SquaredExponential, Matern32 };

std::string_view to_string(KernelFamily family);
KernelFamily parse_kernel_family(std::string_view name);

/// Stationary ARD covariance: one output scale and one lengthscale per
/// input dimension. The unconstrained (log-space) parameter vector is laid
/// out as [log output_scale, log lengthscale_1, ..., log lengthscale_p].
struct KernelSpec {
  KernelFamily family = KernelFamily::SquaredExponential;
  double output_scale = 1.0;
  Eigen::VectorXd lengthscales;

  static KernelSpec isotropic(KernelFamily family, Eigen::Index dim,
                              double output_scale = 1.0, double lengthscale = 1.0);

  Eigen::Index input_dim() const { return lengthscales.size(); }
  Eigen::Index parameter_count() const { return 1 + lengthscales.size(); }

  Eigen::VectorXd log_parameters() const;
  void set_log_parameters(const Eigen::Ref<const Eigen::VectorXd> &params);

  void validate() const;
};

double kernel_value(const KernelSpec &spec, const Eigen::Ref<const Eigen::VectorXd> &x,
                    const Eigen::Ref<const Eigen::VectorXd> &x_prime);

/// Gradient of kernel_value with respect to the log parameters.
Eigen::VectorXd kernel_value_log_gradient(const KernelSpec &spec,
                                          const Eigen::Ref<const Eigen::VectorXd> &x,
                                          const Eigen::Ref<const Eigen::VectorXd> &x_prime);

/// Cross-covariance between the rows of x1 (a x p) and x2 (b x p).
Eigen::MatrixXd kernel_matrix(const KernelSpec &spec, const Eigen::MatrixXd &x1,
                              const Eigen::MatrixXd &x2);

/// k(x, x) for every row; constant for stationary kernels.
Eigen::VectorXd kernel_diag(const KernelSpec &spec, const Eigen::MatrixXd &x);

/// Reverse-mode product for K = kernel_matrix(spec, x1, x2): given the
/// adjoint `adjoint` (a x b) of an objective with respect to K, accumulates
/// d objective / d log-parameters into `log_param_grad` and, when the
/// pointers are non-null, d objective / d x1 and d objective / d x2.
void kernel_matrix_vjp(const KernelSpec &spec, const Eigen::MatrixXd &x1,
                       const Eigen::MatrixXd &x2, const Eigen::MatrixXd &adjoint,
                       Eigen::VectorXd &log_param_grad, Eigen::MatrixXd *x1_grad,
                       Eigen::MatrixXd *x2_grad);

} // namespace cngp
