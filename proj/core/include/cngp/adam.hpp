#pragma once

#include <cmath>

#include <Eigen/Core>

namespace cngp {

/// Adam with bias-corrected moments, written for ascent on an objective.
class Adam {
public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam() = default;
  explicit Adam(Eigen::Index size) : Adam(size, Options{}) {}
  Adam(Eigen::Index size, Options options)
      : options_(options), first_(Eigen::VectorXd::Zero(size)),
        second_(Eigen::VectorXd::Zero(size)) {}

  /// params += lr * m_hat / (sqrt(v_hat) + eps). A zero learning rate
  /// leaves params untouched but still advances the moment estimates.
  void ascend(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd> &grad,
              double lr) {
    ++steps_;
    first_ = options_.beta1 * first_ + (1.0 - options_.beta1) * grad;
    second_ = options_.beta2 * second_ + (1.0 - options_.beta2) * grad.cwiseAbs2();
    if (lr == 0.0) {
      return;
    }
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
    params.array() +=
        lr * (first_.array() / c1) / ((second_.array() / c2).sqrt() + options_.epsilon);
  }

  long steps() const { return steps_; }
  Eigen::Index size() const { return first_.size(); }

private:
  Options options_;
  Eigen::VectorXd first_;
  Eigen::VectorXd second_;
  long steps_ = 0;
};

} // namespace cngp
