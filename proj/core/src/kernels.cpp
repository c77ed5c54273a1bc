#include "cngp/kernels.hpp"

#include <cmath>
#include <numbers>

#include "cngp/error.hpp"

namespace cngp {

namespace {

constexpr double kSqrt3 = 1.7320508075688772935274463415059;

void check_dims(const KernelSpec &spec, Eigen::Index cols1, Eigen::Index cols2) {
  if (cols1 != spec.input_dim() || cols2 != spec.input_dim()) {
    throw DimensionMismatch("kernel: input dimension does not match lengthscales");
  }
}

// Scaled squared distance sum_j ((x_j - x'_j) / l_j)^2.
double scaled_sq_dist(const Eigen::Ref<const Eigen::VectorXd> &x,
                      const Eigen::Ref<const Eigen::VectorXd> &x_prime,
                      const Eigen::VectorXd &inv_ls) {
  return ((x - x_prime).cwiseProduct(inv_ls)).squaredNorm();
}

double value_from_sq_dist(KernelFamily family, double scale, double r2) {
  switch (family) {
  case KernelFamily::SquaredExponential:
    return scale * std::exp(-0.5 * r2);
  case KernelFamily::Matern32: {
    const double d = kSqrt3 * std::sqrt(r2);
    return scale * (1.0 + d) * std::exp(-d);
  }
  }
  return 0.0;
}

// -2 dk/d(r2); finite at r2 = 0 for both families.
double minus_two_dk_dr2(KernelFamily family, double scale, double r2) {
  switch (family) {
  case KernelFamily::SquaredExponential:
    return scale * std::exp(-0.5 * r2);
  case KernelFamily::Matern32:
    // k = s (1 + sqrt(3 r2)) exp(-sqrt(3 r2));  dk/dr2 = -1.5 s exp(-sqrt(3 r2))
    return 3.0 * scale * std::exp(-kSqrt3 * std::sqrt(r2));
  }
  return 0.0;
}

} // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
  case KernelFamily::SquaredExponential:
    return "se";
  case KernelFamily::Matern32:
    return "matern32";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "se" || name == "se_ard" || name == "rbf") {
    return KernelFamily::SquaredExponential;
  }
  if (name == "matern32" || name == "matern32_ard") {
    return KernelFamily::Matern32;
  }
  throw InvalidArgument("unknown kernel family '" + std::string(name) + "'");
}

KernelSpec KernelSpec::isotropic(KernelFamily family, Eigen::Index dim,
                                 double output_scale, double lengthscale) {
  KernelSpec spec;
  spec.family = family;
  spec.output_scale = output_scale;
  spec.lengthscales = Eigen::VectorXd::Constant(dim, lengthscale);
  spec.validate();
  return spec;
}

Eigen::VectorXd KernelSpec::log_parameters() const {
  Eigen::VectorXd p(parameter_count());
  p(0) = std::log(output_scale);
  p.tail(lengthscales.size()) = lengthscales.array().log().matrix();
  return p;
}

void KernelSpec::set_log_parameters(const Eigen::Ref<const Eigen::VectorXd> &params) {
  if (params.size() != parameter_count()) {
    throw DimensionMismatch("KernelSpec: wrong number of log parameters");
  }
  output_scale = std::exp(params(0));
  lengthscales = params.tail(lengthscales.size()).array().exp().matrix();
}

void KernelSpec::validate() const {
  if (!(output_scale > 0.0) || !std::isfinite(output_scale)) {
    throw InvalidArgument("KernelSpec: output scale must be positive");
  }
  if (lengthscales.size() == 0) {
    throw InvalidArgument("KernelSpec: at least one lengthscale required");
  }
  for (Eigen::Index j = 0; j < lengthscales.size(); ++j) {
    if (!(lengthscales(j) > 0.0) || !std::isfinite(lengthscales(j))) {
      throw InvalidArgument("KernelSpec: lengthscales must be positive");
    }
  }
}

double kernel_value(const KernelSpec &spec, const Eigen::Ref<const Eigen::VectorXd> &x,
                    const Eigen::Ref<const Eigen::VectorXd> &x_prime) {
  check_dims(spec, x.size(), x_prime.size());
  const Eigen::VectorXd inv_ls = spec.lengthscales.cwiseInverse();
  return value_from_sq_dist(spec.family, spec.output_scale,
                            scaled_sq_dist(x, x_prime, inv_ls));
}

Eigen::VectorXd kernel_value_log_gradient(const KernelSpec &spec,
                                          const Eigen::Ref<const Eigen::VectorXd> &x,
                                          const Eigen::Ref<const Eigen::VectorXd> &x_prime) {
  check_dims(spec, x.size(), x_prime.size());
  const Eigen::VectorXd inv_ls = spec.lengthscales.cwiseInverse();
  const Eigen::VectorXd scaled = (x - x_prime).cwiseProduct(inv_ls);
  const double r2 = scaled.squaredNorm();
  Eigen::VectorXd grad(spec.parameter_count());
  grad(0) = value_from_sq_dist(spec.family, spec.output_scale, r2);
  // d r2 / d log l_j = -2 scaled_j^2, so dk/dlog l_j = -2 dk/dr2 * scaled_j^2.
  grad.tail(spec.input_dim()) =
      minus_two_dk_dr2(spec.family, spec.output_scale, r2) * scaled.array().square().matrix();
  return grad;
}

Eigen::MatrixXd kernel_matrix(const KernelSpec &spec, const Eigen::MatrixXd &x1,
                              const Eigen::MatrixXd &x2) {
  check_dims(spec, x1.cols(), x2.cols());
  const Eigen::VectorXd inv_ls = spec.lengthscales.cwiseInverse();
  // Pre-scale rows so the inner loop is a plain squared distance.
  const Eigen::MatrixXd s1 = x1 * inv_ls.asDiagonal();
  const Eigen::MatrixXd s2 = x2 * inv_ls.asDiagonal();
  Eigen::MatrixXd k(x1.rows(), x2.rows());
  for (Eigen::Index j = 0; j < s2.rows(); ++j) {
    for (Eigen::Index i = 0; i < s1.rows(); ++i) {
      const double r2 = (s1.row(i) - s2.row(j)).squaredNorm();
      k(i, j) = value_from_sq_dist(spec.family, spec.output_scale, r2);
    }
  }
  return k;
}

Eigen::VectorXd kernel_diag(const KernelSpec &spec, const Eigen::MatrixXd &x) {
  check_dims(spec, x.cols(), x.cols());
  return Eigen::VectorXd::Constant(x.rows(), spec.output_scale);
}

void kernel_matrix_vjp(const KernelSpec &spec, const Eigen::MatrixXd &x1,
                       const Eigen::MatrixXd &x2, const Eigen::MatrixXd &adjoint,
                       Eigen::VectorXd &log_param_grad, Eigen::MatrixXd *x1_grad,
                       Eigen::MatrixXd *x2_grad) {
  check_dims(spec, x1.cols(), x2.cols());
  if (adjoint.rows() != x1.rows() || adjoint.cols() != x2.rows()) {
    throw DimensionMismatch("kernel_matrix_vjp: adjoint has the wrong shape");
  }
  if (log_param_grad.size() != spec.parameter_count()) {
    log_param_grad = Eigen::VectorXd::Zero(spec.parameter_count());
  }
  const Eigen::Index p = spec.input_dim();
  const Eigen::VectorXd inv_ls = spec.lengthscales.cwiseInverse();
  const Eigen::MatrixXd s1 = x1 * inv_ls.asDiagonal();
  const Eigen::MatrixXd s2 = x2 * inv_ls.asDiagonal();
  if (x1_grad != nullptr && (x1_grad->rows() != x1.rows() || x1_grad->cols() != p)) {
    *x1_grad = Eigen::MatrixXd::Zero(x1.rows(), p);
  }
  if (x2_grad != nullptr && (x2_grad->rows() != x2.rows() || x2_grad->cols() != p)) {
    *x2_grad = Eigen::MatrixXd::Zero(x2.rows(), p);
  }

  double scale_grad = 0.0;
  Eigen::VectorXd ls_grad = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd diff(p);
  for (Eigen::Index j = 0; j < s2.rows(); ++j) {
    for (Eigen::Index i = 0; i < s1.rows(); ++i) {
      const double g = adjoint(i, j);
      if (g == 0.0) {
        continue;
      }
      diff = (s1.row(i) - s2.row(j)).transpose();
      const double r2 = diff.squaredNorm();
      scale_grad += g * value_from_sq_dist(spec.family, spec.output_scale, r2);
      const double c = g * minus_two_dk_dr2(spec.family, spec.output_scale, r2);
      ls_grad.array() += c * diff.array().square();
      if (x1_grad != nullptr || x2_grad != nullptr) {
        // dk/dx1_j = dk/dr2 * 2 (x1_j - x2_j) / l_j^2 = -c * diff_j / l_j
        const Eigen::VectorXd dx = -c * diff.cwiseProduct(inv_ls);
        if (x1_grad != nullptr) {
          x1_grad->row(i) += dx.transpose();
        }
        if (x2_grad != nullptr) {
          x2_grad->row(j) -= dx.transpose();
        }
      }
    }
  }
  log_param_grad(0) += scale_grad;
  log_param_grad.tail(p) += ls_grad;
}

} // namespace cngp
