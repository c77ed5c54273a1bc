#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cngp/adam.hpp"
#include "cngp/kernels.hpp"
#include "cngp/likelihoods.hpp"
#include "cngp/numerics.hpp"
#include "cngp/variational.hpp"

namespace cngp {

/// Everything a trained model needs for prediction: kernel hyperparameters,
/// noise model and the variational posterior over inducing values. The mean
/// function is the constant zero.
struct ModelState {
  KernelSpec kernel;
  NoiseModel noise;
  VariationalState variational;

  void validate() const;
};

struct ElboOptions {
  int gh_nodes = 20;
  JitterPolicy jitter;
};

/// Gradient of the (minibatch) ELBO. `cov_factor` is with respect to the
/// entries of the lower-triangular factor itself (upper triangle is zero),
/// `kernel` with respect to KernelSpec::log_parameters() and `noise` with
/// respect to unconstrained_parameters().
struct ElboGradient {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov_factor;
  Eigen::MatrixXd inducing_inputs;
  Eigen::VectorXd kernel;
  Eigen::VectorXd noise;

  bool all_finite() const;
};

struct ElboEvaluation {
  double value = 0.0;
  ElboGradient gradient;
  /// CN only: assignment probabilities used for the batch points, in
  /// batch order.
  std::vector<double> responsibilities;
  std::vector<LatentMarginal> marginals;
};

/// (n_total / |batch|) * sum_{i in batch} term_i - KL[q(u) || p(u)].
/// The per-point term is the expected log-likelihood for Gaussian,
/// Student-t and Laplace noise, and the assignment-augmented bound for CN
/// with responsibilities from cn_responsibility at the current state.
double elbo(const ModelState &model, const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
            std::span<const Eigen::Index> batch, Eigen::Index n_total,
            const ElboOptions &options = {});

/// Full-data ELBO.
double elbo(const ModelState &model, const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
            const ElboOptions &options = {});

/// ELBO value and gradient. For CN noise, `responsibilities` (one per batch
/// point) fixes the assignment distribution; when empty they are computed
/// from the current state. Either way the gradient treats them as constants.
ElboEvaluation elbo_with_gradient(const ModelState &model, const Eigen::MatrixXd &x,
                                  const Eigen::VectorXd &y, std::span<const Eigen::Index> batch,
                                  Eigen::Index n_total,
                                  std::span<const double> responsibilities = {},
                                  const ElboOptions &options = {});

/// Reverse-mode Cholesky: given A = L L^T and the adjoint of L (lower),
/// returns the symmetric adjoint of A.
Eigen::MatrixXd cholesky_backward(const Eigen::MatrixXd &lower, const Eigen::MatrixXd &lower_adjoint);

// ---------------------------------------------------------------------------
// Alternating maximization for contaminated-normal noise
// ---------------------------------------------------------------------------

/// If tau < 1 relabel the components: (pi, tau, s2) -> (1 - pi, 1/tau, tau s2).
/// The mixture density is unchanged.
ContaminatedNormal tau_swap(const ContaminatedNormal &theta);

/// Maximizer of the assignment-weighted objective for fixed responsibilities
/// `alpha` and expected squared residuals `d`:
///   pi  = sum(alpha) / n
///   s2  = mean((1 + (1/tau_old - 1) alpha) d)
///   tau = sum(alpha d) / (s2 * sum(alpha))
/// When sum(alpha) < 1e-12, tau keeps its current value.
ContaminatedNormal closed_form_noise_update(const ContaminatedNormal &current,
                                            std::span<const double> alpha,
                                            std::span<const double> d);

/// Optimizer state for the three parameter blocks of one training run.
struct SgamOptimizer {
  Adam variational;
  Adam kernel;
  Adam noise;

  static SgamOptimizer for_model(const ModelState &model, bool optimize_inducing);
};

struct StepOptions {
  bool optimize_inducing = true;
  ElboOptions elbo;
};

struct StepResult {
  bool applied = false;      ///< false when the step was aborted (state untouched)
  double elbo_before = 0.0;  ///< batch objective at the pre-step state
  std::vector<double> responsibilities;
};

/// Forward step: refresh the assignment probabilities of the batch at the
/// current state and take one Adam ascent step on the variational
/// parameters with them held fixed. Non-finite gradients abort the step.
StepResult sgam_forward_step(ModelState &model, SgamOptimizer &optimizer, const Eigen::MatrixXd &x,
                             const Eigen::VectorXd &y, std::span<const Eigen::Index> batch,
                             double lr, const StepOptions &options = {});

/// Closed-form backward step over the full training set: responsibilities
/// and expected squared residuals at the current state, then
/// closed_form_noise_update. Returns the updated parameters (also written
/// into the model).
ContaminatedNormal sgam_backward_step_closed_form(ModelState &model, const Eigen::MatrixXd &x,
                                                  const Eigen::VectorXd &y,
                                                  const ElboOptions &options = {});

/// Gradient backward step: one Adam ascent step on the unconstrained noise
/// parameters and the kernel log-parameters with responsibilities fixed.
/// Pass `update_noise = false` when the noise parameters are updated in
/// closed form.
StepResult sgam_backward_step_sgd(ModelState &model, SgamOptimizer &optimizer,
                                  const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                                  std::span<const Eigen::Index> batch, double lr,
                                  std::span<const double> responsibilities = {},
                                  bool update_noise = true, const StepOptions &options = {});

/// Joint ascent step on all parameter blocks (used for non-CN likelihoods).
StepResult joint_ascent_step(ModelState &model, SgamOptimizer &optimizer, const Eigen::MatrixXd &x,
                             const Eigen::VectorXd &y, std::span<const Eigen::Index> batch,
                             double lr_variational, double lr_hyper,
                             const StepOptions &options = {});

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 30;
  int batch_size = 256;
  int inducing_count = 100;
  double lr_phi_init = 0.1;
  double lr_theta_init = 0.1;
  double lr_decay = 0.9;
  int restarts = 5;
  std::uint64_t seed = 0;
  int early_stop_patience = 5;
  bool closed_form_theta = true;
  int gh_nodes = 20;
  int mc_samples = 1000;
  bool optimize_inducing = true;
  KernelFamily kernel_family = KernelFamily::SquaredExponential;
  /// Starting kernel hyperparameters (all lengthscales equal).
  double initial_output_scale = 1.0;
  double initial_lengthscale = 1.0;
  int max_aborted_steps = 20;
  JitterPolicy jitter;

  void validate() const;
};

struct TraceRow {
  int restart = 0;
  int epoch = 0; ///< 0 is the initial state
  double elbo = 0.0;
  NoiseModel noise;
  double validation_nlpd = 0.0; ///< NaN when no validation set
  int aborted_steps = 0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  int selected_restart = 0;
  std::vector<double> final_elbos; ///< one per restart (NaN if the restart failed)
};

struct FitResult {
  ModelState model;
  TrainTrace trace;
};

struct ValidationSet {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

/// Initial model for one restart: inducing inputs sampled from the rows of
/// x without replacement, q(u) = p(u), unit kernel hyperparameters and a
/// randomly drawn noise model.
ModelState initial_model(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, NoiseFamily family,
                         const TrainConfig &config, int restart);

/// Multi-restart training; keeps the run with the largest final full-data
/// ELBO. CN models are returned with tau_swap applied.
FitResult fit(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, NoiseFamily family,
              const TrainConfig &config, const std::optional<ValidationSet> &validation = {});

// ---------------------------------------------------------------------------
// Prediction and bounds
// ---------------------------------------------------------------------------

struct PredictOptions {
  int mc_samples = 1000;
  std::uint64_t seed = 0;
  JitterPolicy jitter;
};

/// Gaussian noise -> GaussianPred, CN -> MixturePred, Student-t and
/// Laplace -> SampledPred with mc_samples latent draws per point.
std::vector<PredictiveDistribution> predict(const ModelState &model, const Eigen::MatrixXd &x,
                                            const PredictOptions &options = {});

double mean_validation_nlpd(const ModelState &model, const ValidationSet &validation,
                            const PredictOptions &options = {});

/// Collapsed Gaussian-likelihood bound with the optimal q(u) eliminated:
///   log N(y | 0, s2 I + Q_nn) - tr(K_nn - Q_nn) / (2 s2).
double collapsed_bound_gaussian(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                                const Eigen::MatrixXd &inducing_inputs, const KernelSpec &spec,
                                double noise_var, const JitterPolicy &policy = {});

} // namespace cngp
