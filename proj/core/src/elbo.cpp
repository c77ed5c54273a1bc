#include "cngp/inference.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "cngp/error.hpp"

namespace cngp {

namespace {

void check_batch(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                 std::span<const Eigen::Index> batch, Eigen::Index n_total) {
  if (x.rows() != y.size()) {
    throw DimensionMismatch("elbo: X and y have different row counts");
  }
  if (batch.empty()) {
    throw InvalidArgument("elbo: batch must be nonempty");
  }
  for (const Eigen::Index i : batch) {
    if (i < 0 || i >= x.rows()) {
      throw InvalidArgument("elbo: batch index out of range");
    }
  }
  if (n_total < 1) {
    throw InvalidArgument("elbo: n_total must be positive");
  }
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd &x, std::span<const Eigen::Index> batch) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(batch.size()), x.cols());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = x.row(batch[k]);
  }
  return out;
}

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    idx[static_cast<std::size_t>(i)] = i;
  }
  return idx;
}

} // namespace

void ModelState::validate() const {
  kernel.validate();
  cngp::validate(noise);
  variational.validate();
  if (variational.inducing_inputs.cols() != kernel.input_dim()) {
    throw DimensionMismatch("ModelState: inducing inputs do not match the kernel dimension");
  }
}

bool ElboGradient::all_finite() const {
  return mean.allFinite() && cov_factor.allFinite() && inducing_inputs.allFinite() &&
         kernel.allFinite() && noise.allFinite();
}

double elbo(const ModelState &model, const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
            std::span<const Eigen::Index> batch, Eigen::Index n_total,
            const ElboOptions &options) {
  model.validate();
  check_batch(x, y, batch, n_total);
  const auto marginals =
      latent_marginals(model.variational, model.kernel, gather_rows(x, batch), options.jitter);
  const auto *cn = std::get_if<ContaminatedNormal>(&model.noise);
  const GaussHermiteRule rule = gauss_hermite(options.gh_nodes);
  double sum = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double yi = y(batch[k]);
    const LatentMarginal &q = marginals[k];
    if (cn != nullptr) {
      sum += cn_augmented_term(yi, q, *cn, cn_responsibility(yi, q, *cn)).value;
    } else {
      sum += expected_loglik(model.noise, yi, q, rule);
    }
  }
  const double scale = static_cast<double>(n_total) / static_cast<double>(batch.size());
  return scale * sum - kl_to_prior(model.variational);
}

double elbo(const ModelState &model, const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
            const ElboOptions &options) {
  const auto idx = all_rows(x.rows());
  return elbo(model, x, y, idx, x.rows(), options);
}

Eigen::MatrixXd cholesky_backward(const Eigen::MatrixXd &lower,
                                  const Eigen::MatrixXd &lower_adjoint) {
  const auto tri = lower.triangularView<Eigen::Lower>();
  Eigen::MatrixXd p = lower.transpose() * lower_adjoint.triangularView<Eigen::Lower>().toDenseMatrix();
  p = p.triangularView<Eigen::Lower>();
  p.diagonal() *= 0.5;
  // L^{-T} P L^{-1}
  Eigen::MatrixXd a = tri.transpose().solve(p);
  a = tri.transpose().solve(a.transpose()).transpose();
  return 0.5 * (a + a.transpose());
}

ElboEvaluation elbo_with_gradient(const ModelState &model, const Eigen::MatrixXd &x,
                                  const Eigen::VectorXd &y, std::span<const Eigen::Index> batch,
                                  Eigen::Index n_total, std::span<const double> responsibilities,
                                  const ElboOptions &options) {
  model.validate();
  check_batch(x, y, batch, n_total);
  const auto *cn = std::get_if<ContaminatedNormal>(&model.noise);
  if (!responsibilities.empty() && responsibilities.size() != batch.size()) {
    throw DimensionMismatch("elbo_with_gradient: one responsibility per batch point required");
  }

  const VariationalState &state = model.variational;
  const KernelSpec &spec = model.kernel;
  const Eigen::MatrixXd &z = state.inducing_inputs;
  const Eigen::Index m = state.size();
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  const Eigen::MatrixXd xb = gather_rows(x, batch);

  const Eigen::MatrixXd lk = factor_inducing(spec, z, options.jitter).lower;
  const auto lk_tri = lk.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd l = state.cov_factor.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd w = lk_tri.solve(kernel_matrix(spec, z, xb));
  const Eigen::VectorXd mu = w.transpose() * state.mean;
  const Eigen::MatrixXd t = l.transpose() * w;
  const Eigen::VectorXd kdiag = kernel_diag(spec, xb);

  const double scale = static_cast<double>(n_total) / static_cast<double>(b);
  const GaussHermiteRule rule = cn != nullptr ? GaussHermiteRule{} : gauss_hermite(options.gh_nodes);

  ElboEvaluation out;
  out.marginals.resize(static_cast<std::size_t>(b));
  if (cn != nullptr) {
    out.responsibilities.resize(static_cast<std::size_t>(b));
  }
  Eigen::VectorXd g_mu(b);
  Eigen::VectorXd g_var(b);
  Eigen::VectorXd g_noise = Eigen::VectorXd::Zero(unconstrained_parameter_count(family_of(model.noise)));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double raw_var = kdiag(i) - w.col(i).squaredNorm() + t.col(i).squaredNorm();
    const bool clamped = raw_var < kMinLatentVariance;
    const LatentMarginal q{mu(i), clamped ? kMinLatentVariance : raw_var};
    const double yi = y(batch[static_cast<std::size_t>(i)]);
    PointTerm term;
    if (cn != nullptr) {
      const double alpha = responsibilities.empty() ? cn_responsibility(yi, q, *cn)
                                                    : responsibilities[static_cast<std::size_t>(i)];
      out.responsibilities[static_cast<std::size_t>(i)] = alpha;
      term = cn_augmented_term(yi, q, *cn, alpha);
    } else {
      term = expected_loglik_term(model.noise, yi, q, rule);
    }
    out.marginals[static_cast<std::size_t>(i)] = q;
    sum += term.value;
    g_mu(i) = scale * term.d_mean;
    g_var(i) = clamped ? 0.0 : scale * term.d_var;
    g_noise += scale * term.d_noise;
  }
  out.value = scale * sum - kl_to_prior(state);

  ElboGradient &grad = out.gradient;
  grad.noise = g_noise;
  grad.mean = w * g_mu - state.mean;
  const Eigen::MatrixXd wg = w * g_var.asDiagonal();
  Eigen::MatrixXd dl = 2.0 * wg * t.transpose() - l;
  dl.diagonal() += l.diagonal().cwiseInverse();
  grad.cov_factor = dl.triangularView<Eigen::Lower>();

  // Adjoint of W = L_k^{-1} K_mb, then of K_mb and L_k.
  const Eigen::MatrixXd gw = state.mean * g_mu.transpose() + 2.0 * (l * t - w) * g_var.asDiagonal();
  const Eigen::MatrixXd g_kmb = lk_tri.transpose().solve(gw);
  const Eigen::MatrixXd g_lk = -(g_kmb * w.transpose());
  const Eigen::MatrixXd g_kmm = cholesky_backward(lk, g_lk);

  grad.kernel = Eigen::VectorXd::Zero(spec.parameter_count());
  grad.inducing_inputs = Eigen::MatrixXd::Zero(m, z.cols());
  kernel_matrix_vjp(spec, z, z, g_kmm, grad.kernel, &grad.inducing_inputs, &grad.inducing_inputs);
  kernel_matrix_vjp(spec, z, xb, g_kmb, grad.kernel, &grad.inducing_inputs, nullptr);
  // k(x, x) = output_scale for stationary kernels.
  grad.kernel(0) += g_var.dot(kdiag);
  return out;
}

} // namespace cngp
