#pragma once

#include "promptband/core/errors.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace promptband {

/// ARD lengthscales, output scale and observation noise of a Matérn-5/2 GP.
struct KernelParams {
  Eigen::VectorXd lengthscales;
  double outputscale = 1.0;
  double noise = 1e-2;

  void validate() const {
    if (lengthscales.size() == 0 || !lengthscales.allFinite() || lengthscales.minCoeff() <= 0.0) {
      throw ParameterError("lengthscales must be finite and positive");
    }
    if (!(outputscale > 0.0) || !(noise > 0.0)) {
      throw ParameterError("outputscale and noise must be positive");
    }
  }
};

namespace detail {

template <typename Scalar>
Scalar matern52_from_squared(Scalar r2, Scalar outputscale) {
  using std::exp;
  using std::sqrt;
  const Scalar r = sqrt(r2);
  const Scalar s5r = sqrt(Scalar(5)) * r;
  return outputscale * (Scalar(1) + s5r + Scalar(5) / Scalar(3) * r2) * exp(-s5r);
}

/// dk / d(r^2); finite at r = 0.
template <typename Scalar>
Scalar matern52_dsquared(Scalar r2, Scalar outputscale) {
  using std::exp;
  using std::sqrt;
  const Scalar s5r = sqrt(Scalar(5) * r2);
  return -Scalar(5) / Scalar(6) * outputscale * (Scalar(1) + s5r) * exp(-s5r);
}

}  // namespace detail

/// k(u, v) = s (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r), r^2 = sum ((u - v) / l)^2.
template <typename DerivedU, typename DerivedV, typename DerivedL>
typename DerivedU::Scalar matern52(const Eigen::MatrixBase<DerivedU>& u,
                                   const Eigen::MatrixBase<DerivedV>& v,
                                   const Eigen::MatrixBase<DerivedL>& lengthscales,
                                   typename DerivedU::Scalar outputscale) {
  using Scalar = typename DerivedU::Scalar;
  if (u.size() != v.size() || u.size() != lengthscales.size()) {
    throw DimensionError("matern52: input and lengthscale lengths differ");
  }
  if (lengthscales.minCoeff() <= Scalar(0)) throw ParameterError("lengthscales must be positive");
  const Scalar r2 = (u - v).cwiseQuotient(lengthscales).squaredNorm();
  return detail::matern52_from_squared(r2, outputscale);
}

/// Pairwise scaled squared distances between the rows of x and y.
template <typename DerivedX, typename DerivedY, typename DerivedL>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic> scaled_squared_distances(
    const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y,
    const Eigen::MatrixBase<DerivedL>& lengthscales) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> inv = lengthscales.cwiseInverse().transpose();
  Matrix xs = x.array().rowwise() * inv.array();
  Matrix ys = y.array().rowwise() * inv.array();
  // Explicit differences rather than the |x|^2 + |y|^2 - 2xy expansion, which
  // loses accuracy near the diagonal.
  Matrix d2(x.rows(), y.rows());
  for (Eigen::Index j = 0; j < ys.rows(); ++j) {
    d2.col(j) = (xs.rowwise() - ys.row(j)).rowwise().squaredNorm();
  }
  return d2;
}

/// Kernel matrix K(x, y) with rows of x and y as points.
template <typename DerivedX, typename DerivedY>
Eigen::MatrixXd matern52_matrix(const Eigen::MatrixBase<DerivedX>& x,
                                const Eigen::MatrixBase<DerivedY>& y, const KernelParams& params) {
  if (x.cols() != params.lengthscales.size() || y.cols() != params.lengthscales.size()) {
    throw DimensionError("matern52_matrix: input width does not match lengthscales");
  }
  Eigen::MatrixXd d2 = scaled_squared_distances(x, y, params.lengthscales);
  return d2.unaryExpr(
      [s = params.outputscale](double r2) { return detail::matern52_from_squared(r2, s); });
}

}  // namespace promptband
