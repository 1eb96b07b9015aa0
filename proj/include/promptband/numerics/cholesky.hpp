#pragma once

#include "promptband/core/errors.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>

namespace promptband {

/// Cholesky factorization of a symmetric positive definite matrix. When the
/// plain factorization fails, diagonal jitter of 1e-6, 1e-5 and then 1e-4
/// times the mean diagonal is added before giving up with NumericalError.
template <typename Scalar>
class JitteredCholesky {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  JitteredCholesky() = default;

  template <typename Derived>
  explicit JitteredCholesky(const Eigen::MatrixBase<Derived>& a) {
    compute(a);
  }

  template <typename Derived>
  JitteredCholesky& compute(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols() || a.rows() == 0) {
      throw DimensionError("cholesky needs a non-empty square matrix");
    }
    if (!a.allFinite()) throw NumericalError("cholesky input has non-finite entries");
    constexpr std::array<double, 4> schedule{0.0, 1e-6, 1e-5, 1e-4};
    const Scalar mean_diag = a.diagonal().mean();
    Matrix work = a;
    for (double rel : schedule) {
      jitter_ = static_cast<Scalar>(rel) * std::abs(mean_diag);
      if (rel > 0.0) {
        work = a;
        work.diagonal().array() += jitter_;
      }
      llt_.compute(work);
      if (llt_.info() == Eigen::Success && llt_.matrixLLT().diagonal().minCoeff() > Scalar(0)) {
        return *this;
      }
    }
    throw NumericalError("matrix is not positive definite even after jitter " +
                         std::to_string(static_cast<double>(jitter_)));
  }

  template <typename Derived>
  Matrix solve(const Eigen::MatrixBase<Derived>& b) const {
    if (b.rows() != llt_.rows()) throw DimensionError("cholesky solve: row mismatch");
    return llt_.solve(b);
  }

  /// L^{-1} b
  template <typename Derived>
  Matrix solve_lower(const Eigen::MatrixBase<Derived>& b) const {
    return llt_.matrixL().solve(b);
  }

  Scalar log_determinant() const {
    return Scalar(2) * llt_.matrixLLT().diagonal().array().log().sum();
  }

  Matrix inverse() const { return llt_.solve(Matrix::Identity(llt_.rows(), llt_.rows())); }
  Matrix matrix_l() const { return llt_.matrixL(); }
  Scalar jitter() const { return jitter_; }
  Eigen::Index size() const { return llt_.rows(); }

 private:
  Eigen::LLT<Matrix> llt_;
  Scalar jitter_ = 0;
};

/// Solves A X = B for symmetric positive definite A.
template <typename DerivedA, typename DerivedB>
auto cholesky_solve(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  return JitteredCholesky<Scalar>(a).solve(b);
}

}  // namespace promptband
