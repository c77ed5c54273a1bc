#include "cngp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cngp/error.hpp"
#include "cngp/rng.hpp"

namespace cngp {

namespace {

constexpr double kMinOutlierProb = 1e-10;

// Variational parameters are optimized as one flat vector:
// [mean, lower-triangle of L column-major with softplus^{-1} on the diagonal, Z].
Eigen::Index packed_size(Eigen::Index m, Eigen::Index p, bool with_z) {
  return m + m * (m + 1) / 2 + (with_z ? m * p : 0);
}

Eigen::VectorXd pack_variational(const VariationalState &s, bool with_z) {
  const Eigen::Index m = s.size();
  const Eigen::Index p = s.inducing_inputs.cols();
  Eigen::VectorXd out(packed_size(m, p, with_z));
  Eigen::Index k = 0;
  out.head(m) = s.mean;
  k = m;
  for (Eigen::Index j = 0; j < m; ++j) {
    out(k++) = inverse_softplus(s.cov_factor(j, j));
    for (Eigen::Index i = j + 1; i < m; ++i) {
      out(k++) = s.cov_factor(i, j);
    }
  }
  if (with_z) {
    out.tail(m * p) = Eigen::Map<const Eigen::VectorXd>(s.inducing_inputs.data(), m * p);
  }
  return out;
}

void unpack_variational(const Eigen::VectorXd &v, VariationalState &s, bool with_z) {
  const Eigen::Index m = s.size();
  const Eigen::Index p = s.inducing_inputs.cols();
  s.mean = v.head(m);
  Eigen::Index k = m;
  s.cov_factor.setZero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    s.cov_factor(j, j) = softplus(v(k++));
    for (Eigen::Index i = j + 1; i < m; ++i) {
      s.cov_factor(i, j) = v(k++);
    }
  }
  if (with_z) {
    s.inducing_inputs = Eigen::Map<const Eigen::MatrixXd>(v.data() + k, m, p);
  }
}

Eigen::VectorXd pack_gradient(const ElboGradient &g, const VariationalState &s, bool with_z) {
  const Eigen::Index m = s.size();
  const Eigen::Index p = s.inducing_inputs.cols();
  Eigen::VectorXd out(packed_size(m, p, with_z));
  out.head(m) = g.mean;
  Eigen::Index k = m;
  for (Eigen::Index j = 0; j < m; ++j) {
    // d softplus(r) / dr = sigmoid(r) = 1 - exp(-L_jj)
    out(k++) = g.cov_factor(j, j) * -std::expm1(-s.cov_factor(j, j));
    for (Eigen::Index i = j + 1; i < m; ++i) {
      out(k++) = g.cov_factor(i, j);
    }
  }
  if (with_z) {
    out.tail(m * p) = Eigen::Map<const Eigen::VectorXd>(g.inducing_inputs.data(), m * p);
  }
  return out;
}

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  return idx;
}

// Evaluates the gradient; any numerical failure or non-finite result is
// reported as an aborted step.
std::optional<ElboEvaluation> try_gradient(const ModelState &model, const Eigen::MatrixXd &x,
                                           const Eigen::VectorXd &y,
                                           std::span<const Eigen::Index> batch,
                                           std::span<const double> responsibilities,
                                           const ElboOptions &options) {
  try {
    ElboEvaluation eval =
        elbo_with_gradient(model, x, y, batch, x.rows(), responsibilities, options);
    if (!std::isfinite(eval.value) || !eval.gradient.all_finite()) {
      return std::nullopt;
    }
    return eval;
  } catch (const NotPositiveDefinite &) {
    return std::nullopt;
  } catch (const EvaluationError &) {
    return std::nullopt;
  }
}

bool model_is_finite(const ModelState &model) {
  return model.variational.mean.allFinite() && model.variational.cov_factor.allFinite() &&
         model.variational.inducing_inputs.allFinite() &&
         (model.variational.cov_factor.diagonal().array() > 0.0).all() &&
         model.kernel.log_parameters().allFinite() &&
         unconstrained_parameters(model.noise).allFinite();
}

double sample_variance(const Eigen::VectorXd &y) {
  if (y.size() < 2) {
    return 1.0;
  }
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
  return var > 0.0 ? var : 1.0;
}

} // namespace

ContaminatedNormal tau_swap(const ContaminatedNormal &theta) {
  if (theta.inflation < 1.0) {
    return {1.0 - theta.outlier_prob, 1.0 / theta.inflation, theta.inflation * theta.noise_var};
  }
  return theta;
}

ContaminatedNormal closed_form_noise_update(const ContaminatedNormal &current,
                                            std::span<const double> alpha,
                                            std::span<const double> d) {
  if (alpha.size() != d.size()) {
    throw DimensionMismatch("closed_form_noise_update: alpha and d differ in length");
  }
  if (alpha.empty()) {
    throw InvalidArgument("closed_form_noise_update: no points");
  }
  const double n = static_cast<double>(alpha.size());
  double sum_alpha = 0.0;
  double weighted = 0.0;
  double alpha_d = 0.0;
  const double shrink = 1.0 / current.inflation - 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    sum_alpha += alpha[i];
    weighted += (1.0 + shrink * alpha[i]) * d[i];
    alpha_d += alpha[i] * d[i];
  }
  ContaminatedNormal next = current;
  next.outlier_prob = std::clamp(sum_alpha / n, kMinOutlierProb, 1.0 - kMinOutlierProb);
  next.noise_var = weighted / n;
  if (sum_alpha >= 1e-12) {
    next.inflation = alpha_d / (next.noise_var * sum_alpha);
  }
  return next;
}

SgamOptimizer SgamOptimizer::for_model(const ModelState &model, bool optimize_inducing) {
  const VariationalState &v = model.variational;
  return {Adam(packed_size(v.size(), v.inducing_inputs.cols(), optimize_inducing)),
          Adam(model.kernel.parameter_count()),
          Adam(unconstrained_parameter_count(family_of(model.noise)))};
}

StepResult sgam_forward_step(ModelState &model, SgamOptimizer &optimizer, const Eigen::MatrixXd &x,
                             const Eigen::VectorXd &y, std::span<const Eigen::Index> batch,
                             double lr, const StepOptions &options) {
  if (!std::holds_alternative<ContaminatedNormal>(model.noise)) {
    throw InvalidArgument("sgam_forward_step: contaminated-normal noise required");
  }
  StepResult result;
  const auto eval = try_gradient(model, x, y, batch, {}, options.elbo);
  if (!eval) {
    return result;
  }
  result.elbo_before = eval->value;
  result.responsibilities = eval->responsibilities;
  ModelState next = model;
  Eigen::VectorXd params = pack_variational(next.variational, options.optimize_inducing);
  optimizer.variational.ascend(
      params, pack_gradient(eval->gradient, next.variational, options.optimize_inducing), lr);
  unpack_variational(params, next.variational, options.optimize_inducing);
  if (!model_is_finite(next)) {
    return result;
  }
  model = std::move(next);
  result.applied = true;
  return result;
}

ContaminatedNormal sgam_backward_step_closed_form(ModelState &model, const Eigen::MatrixXd &x,
                                                  const Eigen::VectorXd &y,
                                                  const ElboOptions &options) {
  const auto *cn = std::get_if<ContaminatedNormal>(&model.noise);
  if (cn == nullptr) {
    throw InvalidArgument("sgam_backward_step_closed_form: contaminated-normal noise required");
  }
  if (x.rows() != y.size()) {
    throw DimensionMismatch("sgam_backward_step_closed_form: X and y differ in rows");
  }
  const auto marginals = latent_marginals(model.variational, model.kernel, x, options.jitter);
  std::vector<double> alpha(marginals.size());
  std::vector<double> d(marginals.size());
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    const double yi = y(static_cast<Eigen::Index>(i));
    alpha[i] = cn_responsibility(yi, marginals[i], *cn);
    const double r = yi - marginals[i].mean;
    d[i] = r * r + marginals[i].var;
  }
  const ContaminatedNormal next = closed_form_noise_update(*cn, alpha, d);
  model.noise = next;
  return next;
}

StepResult sgam_backward_step_sgd(ModelState &model, SgamOptimizer &optimizer,
                                  const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                                  std::span<const Eigen::Index> batch, double lr,
                                  std::span<const double> responsibilities, bool update_noise,
                                  const StepOptions &options) {
  StepResult result;
  const auto eval = try_gradient(model, x, y, batch, responsibilities, options.elbo);
  if (!eval) {
    return result;
  }
  result.elbo_before = eval->value;
  result.responsibilities = eval->responsibilities;
  ModelState next = model;
  Eigen::VectorXd kp = next.kernel.log_parameters();
  optimizer.kernel.ascend(kp, eval->gradient.kernel, lr);
  next.kernel.set_log_parameters(kp);
  if (update_noise) {
    Eigen::VectorXd np = unconstrained_parameters(next.noise);
    optimizer.noise.ascend(np, eval->gradient.noise, lr);
    next.noise = with_unconstrained_parameters(next.noise, np);
  }
  if (!model_is_finite(next)) {
    return result;
  }
  try {
    cngp::validate(next.noise);
  } catch (const InvalidArgument &) {
    return result;
  }
  model = std::move(next);
  result.applied = true;
  return result;
}

StepResult joint_ascent_step(ModelState &model, SgamOptimizer &optimizer, const Eigen::MatrixXd &x,
                             const Eigen::VectorXd &y, std::span<const Eigen::Index> batch,
                             double lr_variational, double lr_hyper, const StepOptions &options) {
  StepResult result;
  const auto eval = try_gradient(model, x, y, batch, {}, options.elbo);
  if (!eval) {
    return result;
  }
  result.elbo_before = eval->value;
  result.responsibilities = eval->responsibilities;
  ModelState next = model;
  Eigen::VectorXd params = pack_variational(next.variational, options.optimize_inducing);
  optimizer.variational.ascend(
      params, pack_gradient(eval->gradient, next.variational, options.optimize_inducing),
      lr_variational);
  unpack_variational(params, next.variational, options.optimize_inducing);
  Eigen::VectorXd kp = next.kernel.log_parameters();
  optimizer.kernel.ascend(kp, eval->gradient.kernel, lr_hyper);
  next.kernel.set_log_parameters(kp);
  Eigen::VectorXd np = unconstrained_parameters(next.noise);
  optimizer.noise.ascend(np, eval->gradient.noise, lr_hyper);
  next.noise = with_unconstrained_parameters(next.noise, np);
  if (!model_is_finite(next)) {
    return result;
  }
  try {
    cngp::validate(next.noise);
  } catch (const InvalidArgument &) {
    return result;
  }
  model = std::move(next);
  result.applied = true;
  return result;
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1 || inducing_count < 1 || restarts < 1) {
    throw InvalidArgument("TrainConfig: epochs, batch_size, inducing_count and restarts must be positive");
  }
  if (!(lr_phi_init > 0.0) || !(lr_theta_init > 0.0)) {
    throw InvalidArgument("TrainConfig: learning rates must be positive");
  }
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw InvalidArgument("TrainConfig: lr_decay must lie in (0, 1]");
  }
  if (early_stop_patience < 0) {
    throw InvalidArgument("TrainConfig: early_stop_patience must be nonnegative");
  }
  if (gh_nodes < 1 || gh_nodes > kMaxGaussHermiteNodes) {
    throw InvalidArgument("TrainConfig: gh_nodes out of range");
  }
  if (mc_samples < 1) {
    throw InvalidArgument("TrainConfig: mc_samples must be positive");
  }
  if (!(initial_output_scale > 0.0) || !(initial_lengthscale > 0.0)) {
    throw InvalidArgument("TrainConfig: initial kernel hyperparameters must be positive");
  }
  if (max_aborted_steps < 0) {
    throw InvalidArgument("TrainConfig: max_aborted_steps must be nonnegative");
  }
  jitter.validate();
}

ModelState initial_model(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, NoiseFamily family,
                         const TrainConfig &config, int restart) {
  if (x.rows() < config.inducing_count) {
    throw DataTooSmall("fit: fewer training rows than inducing points");
  }
  Rng rng(config.seed, Stream::Init, static_cast<std::uint64_t>(restart));
  const auto rows = rng.sample_without_replacement(x.rows(), config.inducing_count);
  Eigen::MatrixXd z(config.inducing_count, x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    z.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
  }
  ModelState model;
  model.kernel = KernelSpec::isotropic(config.kernel_family, x.cols(), config.initial_output_scale,
                                      config.initial_lengthscale);
  model.variational = VariationalState::prior(z);
  const double var_y = sample_variance(y);
  switch (family) {
  case NoiseFamily::Gaussian:
    model.noise = GaussianNoise{var_y * rng.uniform(0.5, 1.5)};
    break;
  case NoiseFamily::ContaminatedNormal: {
    const double pi = rng.uniform(0.05, 0.3);
    const double tau = rng.uniform(2.0, 20.0);
    model.noise = ContaminatedNormal{pi, tau, var_y * rng.uniform(0.5, 1.5)};
    break;
  }
  case NoiseFamily::StudentT:
    model.noise = StudentTNoise{5.0, std::sqrt(var_y * rng.uniform(0.5, 1.5))};
    break;
  case NoiseFamily::Laplace:
    model.noise = LaplaceNoise{std::sqrt(0.5 * var_y * rng.uniform(0.5, 1.5))};
    break;
  }
  return model;
}

namespace {

struct RunOutcome {
  ModelState model;
  std::vector<TraceRow> rows;
  double final_elbo = std::numeric_limits<double>::quiet_NaN();
};

RunOutcome run_once(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, NoiseFamily family,
                    const TrainConfig &config, const std::optional<ValidationSet> &validation,
                    int restart) {
  const Eigen::Index n = x.rows();
  const ElboOptions elbo_options{config.gh_nodes, config.jitter};
  const StepOptions step{config.optimize_inducing, elbo_options};
  const PredictOptions predict_options{config.mc_samples, config.seed, config.jitter};
  const bool is_cn = family == NoiseFamily::ContaminatedNormal;
  const bool early_stop = validation.has_value() && config.early_stop_patience > 0;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  RunOutcome out;
  ModelState model = initial_model(x, y, family, config, restart);
  SgamOptimizer optimizer = SgamOptimizer::for_model(model, config.optimize_inducing);
  Rng shuffle_rng(config.seed, Stream::Shuffle, static_cast<std::uint64_t>(restart));

  auto record = [&](int epoch, int aborted) {
    TraceRow row;
    row.restart = restart;
    row.epoch = epoch;
    row.elbo = elbo(model, x, y, elbo_options);
    row.noise = model.noise;
    row.validation_nlpd = validation ? mean_validation_nlpd(model, *validation, predict_options) : nan;
    row.aborted_steps = aborted;
    out.rows.push_back(row);
    return row;
  };

  const TraceRow first = record(0, 0);
  ModelState best = model;
  double best_nlpd = first.validation_nlpd;
  int since_best = 0;
  int aborted_total = 0;

  std::vector<Eigen::Index> order = all_rows(n);
  const auto batch_size = static_cast<std::size_t>(std::min<Eigen::Index>(config.batch_size, n));
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double decay = std::pow(config.lr_decay, epoch - 1);
    const double lr_phi = config.lr_phi_init * decay;
    const double lr_theta = config.lr_theta_init * decay;
    shuffle_rng.shuffle(order);
    int aborted = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::span<const Eigen::Index> batch(order.data() + start,
                                                std::min(batch_size, order.size() - start));
      bool ok = true;
      if (is_cn) {
        ok = sgam_forward_step(model, optimizer, x, y, batch, lr_phi, step).applied;
        ok = sgam_backward_step_sgd(model, optimizer, x, y, batch, lr_theta, {},
                                    !config.closed_form_theta, step)
                 .applied &&
             ok;
      } else {
        ok = joint_ascent_step(model, optimizer, x, y, batch, lr_phi, lr_theta, step).applied;
      }
      if (!ok) {
        ++aborted;
        if (++aborted_total > config.max_aborted_steps) {
          throw NonFiniteObjective("fit: too many aborted steps (non-finite gradients)");
        }
      }
    }
    if (is_cn && config.closed_form_theta) {
      ModelState next = model;
      sgam_backward_step_closed_form(next, x, y, elbo_options);
      if (model_is_finite(next)) {
        model = std::move(next);
      }
    }
    const TraceRow row = record(epoch, aborted);
    if (!std::isfinite(row.elbo)) {
      throw NonFiniteObjective("fit: non-finite ELBO after epoch");
    }
    if (early_stop) {
      if (row.validation_nlpd < best_nlpd || !std::isfinite(best_nlpd)) {
        best_nlpd = row.validation_nlpd;
        best = model;
        since_best = 0;
      } else if (++since_best >= config.early_stop_patience) {
        break;
      }
    }
  }
  if (early_stop) {
    model = best;
  }
  out.final_elbo = elbo(model, x, y, elbo_options);
  out.model = std::move(model);
  return out;
}

} // namespace

FitResult fit(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, NoiseFamily family,
              const TrainConfig &config, const std::optional<ValidationSet> &validation) {
  config.validate();
  if (x.rows() != y.size()) {
    throw DimensionMismatch("fit: X and y differ in rows");
  }
  if (x.rows() < 1 || x.rows() < config.inducing_count) {
    throw DataTooSmall("fit: fewer training rows than inducing points");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw InvalidArgument("fit: non-finite training data");
  }
  if (config.batch_size > x.rows()) {
    throw InvalidArgument("fit: batch_size exceeds the number of training rows");
  }
  if (validation && (validation->x.rows() != validation->y.size() ||
                     validation->x.cols() != x.cols() || validation->x.rows() < 1)) {
    throw DimensionMismatch("fit: validation set shape mismatch");
  }

  FitResult result;
  std::optional<RunOutcome> best;
  std::optional<NonFiniteObjective> last_failure;
  for (int r = 0; r < config.restarts; ++r) {
    try {
      RunOutcome run = run_once(x, y, family, config, validation, r);
      result.trace.rows.insert(result.trace.rows.end(), run.rows.begin(), run.rows.end());
      result.trace.final_elbos.push_back(run.final_elbo);
      if (!best || run.final_elbo > best->final_elbo) {
        result.trace.selected_restart = r;
        best = std::move(run);
      }
    } catch (const NonFiniteObjective &e) {
      result.trace.final_elbos.push_back(std::numeric_limits<double>::quiet_NaN());
      last_failure = e;
    }
  }
  if (!best) {
    throw *last_failure;
  }
  result.model = std::move(best->model);
  if (auto *cn = std::get_if<ContaminatedNormal>(&result.model.noise)) {
    *cn = tau_swap(*cn);
  }
  return result;
}

} // namespace cngp
