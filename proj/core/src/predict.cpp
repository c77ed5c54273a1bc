#include "cngp/inference.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "cngp/error.hpp"
#include "cngp/rng.hpp"

namespace cngp {

std::vector<PredictiveDistribution> predict(const ModelState &model, const Eigen::MatrixXd &x,
                                            const PredictOptions &options) {
  model.validate();
  if (options.mc_samples < 1) {
    throw InvalidArgument("predict: mc_samples must be positive");
  }
  const auto marginals = latent_marginals(model.variational, model.kernel, x, options.jitter);
  std::vector<PredictiveDistribution> out;
  out.reserve(marginals.size());
  Rng rng(options.seed, Stream::Predict);
  for (const LatentMarginal &q : marginals) {
    if (const auto *g = std::get_if<GaussianNoise>(&model.noise)) {
      out.emplace_back(GaussianPred{q.mean, q.var + g->noise_var});
    } else if (const auto *cn = std::get_if<ContaminatedNormal>(&model.noise)) {
      out.emplace_back(MixturePred{cn->outlier_prob, q.mean,
                                   q.var + cn->inflation * cn->noise_var, q.var + cn->noise_var});
    } else {
      SampledPred s;
      s.noise = model.noise;
      s.latent_samples.resize(static_cast<std::size_t>(options.mc_samples));
      const double sd = std::sqrt(q.var);
      for (double &f : s.latent_samples) {
        f = q.mean + sd * rng.normal();
      }
      out.emplace_back(std::move(s));
    }
  }
  return out;
}

double mean_validation_nlpd(const ModelState &model, const ValidationSet &validation,
                            const PredictOptions &options) {
  if (validation.x.rows() != validation.y.size() || validation.y.size() < 1) {
    throw DimensionMismatch("validation set: X and y differ in rows");
  }
  const auto preds = predict(model, validation.x, options);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sum += predictive_nlpd(preds[i], validation.y(static_cast<Eigen::Index>(i)));
  }
  return sum / static_cast<double>(preds.size());
}

double collapsed_bound_gaussian(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                                const Eigen::MatrixXd &inducing_inputs, const KernelSpec &spec,
                                double noise_var, const JitterPolicy &policy) {
  if (x.rows() != y.size()) {
    throw DimensionMismatch("collapsed_bound_gaussian: X and y differ in rows");
  }
  if (!(noise_var > 0.0)) {
    throw InvalidArgument("collapsed_bound_gaussian: noise variance must be positive");
  }
  const Eigen::Index n = x.rows();
  const Eigen::Index m = inducing_inputs.rows();
  const Eigen::MatrixXd lk = factor_inducing(spec, inducing_inputs, policy).lower;
  const Eigen::MatrixXd a =
      lk.triangularView<Eigen::Lower>().solve(kernel_matrix(spec, inducing_inputs, x));
  // Woodbury form of log N(y | 0, s2 I + A^T A).
  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(m, m) + (a * a.transpose()) / noise_var;
  const Eigen::MatrixXd lb = cholesky_psd(b, policy).lower;
  const Eigen::VectorXd c = lb.triangularView<Eigen::Lower>().solve(a * y) / noise_var;
  const double log_det =
      static_cast<double>(n) * std::log(noise_var) + 2.0 * lb.diagonal().array().log().sum();
  const double quad = y.squaredNorm() / noise_var - c.squaredNorm();
  const double log_marginal = -0.5 * (static_cast<double>(n) * kLogTwoPi + log_det + quad);
  const double trace = kernel_diag(spec, x).sum() - a.squaredNorm();
  return log_marginal - 0.5 * trace / noise_var;
}

} // namespace cngp
