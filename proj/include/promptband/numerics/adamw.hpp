#pragma once

#include <Eigen/Dense>

namespace promptband {

struct AdamWOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay and bias correction. step() minimizes.
class AdamW {
 public:
  AdamW(AdamWOptions options, Eigen::Index n_params)
      : options_(options),
        first_(Eigen::VectorXd::Zero(n_params)),
        second_(Eigen::VectorXd::Zero(n_params)) {}

  /// Applies one update in place. Throws NumericalError on a non-finite gradient.
  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads);

  long steps() const { return step_; }
  const AdamWOptions& options() const { return options_; }
  const Eigen::VectorXd& first_moment() const { return first_; }
  const Eigen::VectorXd& second_moment() const { return second_; }

 private:
  AdamWOptions options_;
  Eigen::VectorXd first_;
  Eigen::VectorXd second_;
  long step_ = 0;
};

}  // namespace promptband
