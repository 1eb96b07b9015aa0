#include "promptband/surrogate/mll.hpp"

#include <cmath>

namespace promptband {

RawKernelParams RawKernelParams::initial(Eigen::Index dims, double noise_floor) {
  RawKernelParams p;
  p.log_lengthscales = Eigen::VectorXd::Zero(dims);
  p.noise_floor = noise_floor;
  return p;
}

KernelParams RawKernelParams::constrained() const {
  KernelParams k;
  k.lengthscales = log_lengthscales.array().exp();
  k.outputscale = std::exp(log_outputscale);
  k.noise = noise_floor + std::exp(raw_noise);
  return k;
}

Eigen::VectorXd RawKernelParams::flatten() const {
  Eigen::VectorXd flat(size());
  flat << log_lengthscales, log_outputscale, raw_noise;
  return flat;
}

void RawKernelParams::assign(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != size()) throw DimensionError("kernel parameter vector has the wrong length");
  const Eigen::Index p = log_lengthscales.size();
  log_lengthscales = flat.head(p);
  log_outputscale = flat(p);
  raw_noise = flat(p + 1);
}

MllResult log_marginal_likelihood(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                                  const RawKernelParams& raw, bool with_gradients) {
  const Eigen::Index n = features.rows();
  const Eigen::Index p = features.cols();
  if (targets.size() != n) throw DimensionError("targets and features differ in length");
  if (raw.log_lengthscales.size() != p) throw DimensionError("lengthscales do not match features");

  const KernelParams kp = raw.constrained();
  const Eigen::MatrixXd d2 = scaled_squared_distances(features, features, kp.lengthscales);
  Eigen::MatrixXd k = d2.unaryExpr(
      [s = kp.outputscale](double r2) { return detail::matern52_from_squared(r2, s); });
  Eigen::MatrixXd kt = k;
  kt.diagonal().array() += kp.noise;

  const JitteredCholesky<double> chol(kt);
  const Eigen::VectorXd alpha = chol.solve(targets);

  MllResult out;
  out.value = -targets.dot(alpha) - chol.log_determinant();
  if (!with_gradients) return out;

  // d value = tr(G dK) with G = alpha alpha^T - K^-1.
  const Eigen::MatrixXd g = alpha * alpha.transpose() - chol.inverse();
  const Eigen::MatrixXd dk_dr2 = d2.unaryExpr(
      [s = kp.outputscale](double r2) { return detail::matern52_dsquared(r2, s); });
  const Eigen::MatrixXd w = g.cwiseProduct(dk_dr2);  // symmetric
  const Eigen::VectorXd w_rows = w.rowwise().sum();
  const Eigen::ArrayXd inv_l2 = kp.lengthscales.array().square().inverse();

  out.grad_raw.resize(raw.size());
  // d r2_ij / d log l_d = -2 (x_id - x_jd)^2 / l_d^2
  for (Eigen::Index d = 0; d < p; ++d) {
    const Eigen::VectorXd x = features.col(d);
    const double sum_sq = 2.0 * x.cwiseAbs2().dot(w_rows) - 2.0 * x.dot(w * x);
    out.grad_raw(d) = -2.0 * inv_l2(d) * sum_sq;
  }
  out.grad_raw(p) = g.cwiseProduct(k).sum();
  out.grad_raw(p + 1) = g.trace() * std::exp(raw.raw_noise);

  // d value / d x_i = 2 sum_j w_ij * 2 (x_i - x_j) / l^2
  out.grad_features = 4.0 * (w_rows.asDiagonal() * features - w * features);
  out.grad_features.array().rowwise() *= inv_l2.transpose();
  return out;
}

}  // namespace promptband
