#include "cngp/numerics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>

#include "cngp/error.hpp"

namespace cngp {

void JitterPolicy::validate() const {
  if (!(initial_jitter >= 0.0) || !(growth_factor > 1.0) || max_attempts < 1) {
    throw InvalidArgument("JitterPolicy requires initial_jitter >= 0, "
                          "growth_factor > 1 and max_attempts >= 1");
  }
}

namespace {

bool try_factor(const Eigen::MatrixXd &a, double jitter, Eigen::MatrixXd &out) {
  Eigen::MatrixXd shifted = a;
  shifted.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) {
    return false;
  }
  out = llt.matrixL();
  return (out.diagonal().array() > 0.0).all() && out.allFinite();
}

} // namespace

CholeskyResult cholesky_psd(const Eigen::MatrixXd &a, const JitterPolicy &policy) {
  policy.validate();
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("cholesky_psd: matrix is not square");
  }
  if (a.rows() == 0) {
    return {Eigen::MatrixXd(0, 0), 0.0};
  }
  const double scale = a.cwiseAbs().maxCoeff();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1e-300)) {
    throw InvalidArgument("cholesky_psd: matrix is not symmetric");
  }

  CholeskyResult result;
  if (try_factor(a, 0.0, result.lower)) {
    return result;
  }
  const double mean_diag = std::max(a.diagonal().mean(), 0.0);
  const double base = policy.initial_jitter * (mean_diag > 0.0 ? mean_diag : 1.0);
  double jitter = base;
  for (int attempt = 0; attempt < policy.max_attempts; ++attempt) {
    if (try_factor(a, jitter, result.lower)) {
      result.jitter = jitter;
      return result;
    }
    jitter *= policy.growth_factor;
  }
  std::ostringstream msg;
  msg << "cholesky_psd: matrix of size " << a.rows()
      << " not positive definite after jitter " << jitter / policy.growth_factor;
  throw NotPositiveDefinite(msg.str());
}

GaussHermiteRule gauss_hermite(int node_count) {
  if (node_count < 1 || node_count > kMaxGaussHermiteNodes) {
    throw InvalidArgument("gauss_hermite: node count must be in [1, 64]");
  }
  // Jacobi matrix of the Hermite recurrence: zero diagonal,
  // off-diagonal sqrt(k/2).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(node_count, node_count);
  for (int k = 1; k < node_count; ++k) {
    const double b = std::sqrt(0.5 * k);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  const double mu0 = std::sqrt(std::numbers::pi);

  GaussHermiteRule rule;
  rule.nodes.resize(node_count);
  rule.weights.resize(node_count);
  for (int k = 0; k < node_count; ++k) {
    const double v0 = eig.eigenvectors()(0, k);
    rule.nodes[k] = eig.eigenvalues()(k);
    rule.weights[k] = mu0 * v0 * v0;
  }
  // Exact symmetry: average mirrored pairs, zero the middle node.
  for (int k = 0; k < node_count / 2; ++k) {
    const int j = node_count - 1 - k;
    const double t = 0.5 * (rule.nodes[j] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[j] + rule.weights[k]);
    rule.nodes[k] = -t;
    rule.nodes[j] = t;
    rule.weights[k] = w;
    rule.weights[j] = w;
  }
  if (node_count % 2 == 1) {
    rule.nodes[node_count / 2] = 0.0;
  }
  // Renormalize the small accumulated error in the total mass.
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (double &w : rule.weights) {
    w *= mu0 / total;
  }
  return rule;
}

double gh_expect(double mean, double var, const std::function<double(double)> &g,
                 const GaussHermiteRule &rule) {
  if (!(var > 0.0)) {
    throw InvalidArgument("gh_expect: variance must be positive");
  }
  const double spread = std::sqrt(2.0 * var);
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double value = g(mean + spread * rule.nodes[k]);
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "gh_expect: integrand is not finite at f = "
          << mean + spread * rule.nodes[k];
      throw EvaluationError(msg.str());
    }
    acc += rule.weights[k] * value;
  }
  return acc / std::sqrt(std::numbers::pi);
}

double gh_expect(double mean, double var, const std::function<double(double)> &g,
                 int node_count) {
  return gh_expect(mean, var, g, gauss_hermite(node_count));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidArgument("normal_quantile: probability must be in (0, 1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

} // namespace cngp
