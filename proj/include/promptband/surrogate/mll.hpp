#pragma once

#include "promptband/numerics/cholesky.hpp"
#include "promptband/surrogate/kernel.hpp"

#include <Eigen/Dense>

namespace promptband {

/// Unconstrained kernel parameters optimized by the fit:
///   lengthscale = exp(log_lengthscale), outputscale = exp(log_outputscale),
///   noise = noise_floor + exp(raw_noise).
struct RawKernelParams {
  Eigen::VectorXd log_lengthscales;
  double log_outputscale = 0.0;
  double raw_noise = -4.605170185988091;  // log(1e-2)
  double noise_floor = 1e-6;

  static RawKernelParams initial(Eigen::Index dims, double noise_floor = 1e-6);

  KernelParams constrained() const;
  Eigen::Index size() const { return log_lengthscales.size() + 2; }
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::Ref<const Eigen::VectorXd>& flat);
};

struct MllResult {
  double value = 0.0;  // -v^T K^-1 v - log|K|
  Eigen::VectorXd grad_raw;       // d value / d RawKernelParams::flatten()
  Eigen::MatrixXd grad_features;  // d value / d features (n x p)
};

/// Value of -v^T K^-1 v - log|K| with K = k(X, X) + noise I, and optionally its
/// gradients with respect to the raw kernel parameters and the inputs.
MllResult log_marginal_likelihood(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                                  const RawKernelParams& params, bool with_gradients = true);

}  // namespace promptband
